// hyalign: synthetic benchmark generation, hyperbolic cycle alignment,
// metric evaluation and the hyperbolic-sensitivity sweep, as CLI verbs.
//
// Exit codes: 0 success, 1 usage/input error, 2 IO error, 3 numerical
// failure.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hyalign/cyclealign.hpp"
#include "hyalign/io.hpp"
#include "hyalign/metrics.hpp"
#include "hyalign/poincare.hpp"
#include "hyalign/synth.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace hyalign;

namespace {

struct CommonOpts {
    uint64_t seed = 0;
    std::string config;
    std::string out_dir = ".";
    double curvature = 0.01;
    int iterations = 500;
    std::string ablate = "none";
};

// JSON config files use flat keys mirroring the flags; explicitly passed
// flags override file values, so the file is applied only to unset options.
json load_config(const std::string& path) {
    if (path.empty()) return json::object();
    std::ifstream in(path);
    if (!in) throw IoError("config: cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw IoError(std::string("config: parse error: ") + e.what());
    }
    return j;
}

template <class T>
void apply_config(const json& j, const CLI::Option* opt, const char* key, T& value) {
    if (opt->count() == 0 && j.contains(key)) value = j.at(key).get<T>();
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory " + dir);
    if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir);
}

std::string join(const std::string& dir, const std::string& name) {
    return (fs::path(dir) / name).string();
}

json breakdown_json(const LossBreakdown& b) {
    return json{{"adv", b.adv}, {"cc", b.cc}, {"h2c", b.h2c},
                {"sm", b.sm},   {"f", b.f},   {"total", b.total}};
}

AlignConfig build_align_config(const CommonOpts& common) {
    AlignConfig cfg;
    cfg.curvature = Curvature(common.curvature);
    cfg.iterations = common.iterations;
    cfg.seed = common.seed;
    cfg.ablation = parse_ablation(common.ablate);
    return cfg;
}

// ---- synth ----

struct SynthOpts {
    CommonOpts common;
    int64_t height = 128, width = 128;
    int shapes = 5;
    double magnitude = 6.0;
    std::optional<double> rigid;
    std::string which = "t";
};

int cmd_synth(const SynthOpts& o) {
    if (o.which != "t" && o.which != "v")
        throw CLI::ValidationError("--which must be 't' or 'v'");
    ensure_dir(o.common.out_dir);

    ScenePair pair = gen_scene(o.common.seed, o.height, o.width, o.shapes);
    Grid field = o.rigid.has_value()
                     ? rigid_shift_field(o.height, o.width, *o.rigid)
                     : random_nonlinear_warp(o.common.seed + 1, o.height, o.width, o.magnitude);
    Modality which = o.which == "t" ? Modality::thermal : Modality::visible;
    ScenePair mis = misalign(pair, field, which);

    write_pgm(join(o.common.out_dir, "V.pgm"), pair.V);
    write_pgm(join(o.common.out_dir, "T.pgm"), pair.T);
    const char* mis_name = which == Modality::thermal ? "T_misaligned.pgm" : "V_misaligned.pgm";
    write_pgm(join(o.common.out_dir, mis_name), which == Modality::thermal ? mis.T : mis.V);
    write_field(join(o.common.out_dir, "truth_field.txt"), mis.truth_field);
    write_landmarks(join(o.common.out_dir, "landmarks.txt"), mis.landmarks_v, mis.landmarks_t);
    std::cout << "wrote scene pair to " << o.common.out_dir << "\n";
    return 0;
}

// ---- align ----

struct AlignOpts {
    CommonOpts common;
    std::string visible, thermal;
};

int cmd_align(const AlignOpts& o) {
    ensure_dir(o.common.out_dir);
    Grid V = read_pgm(o.visible);
    Grid T = read_pgm(o.thermal);
    if (!V.same_shape(T)) throw CLI::ValidationError("input images differ in shape");

    AlignConfig cfg = build_align_config(o.common);
    AlignResult res = register_pair(V, T, cfg);

    write_pgm(join(o.common.out_dir, "T_v.pgm"), res.T_v);
    write_pgm(join(o.common.out_dir, "V_t.pgm"), res.V_t);
    write_pgm(join(o.common.out_dir, "T_vt.pgm"), res.T_vt);
    write_pgm(join(o.common.out_dir, "V_tv.pgm"), res.V_tv);
    write_pgm(join(o.common.out_dir, "F.pgm"), res.F);
    write_field(join(o.common.out_dir, "field_t2v.txt"), res.field_t2v);
    write_field(join(o.common.out_dir, "field_v2t.txt"), res.field_v2t);

    {
        std::ofstream csv(join(o.common.out_dir, "loss_history.csv"));
        if (!csv) throw IoError("cannot write loss_history.csv");
        csv << "iter,adv,cc,h2c,sm,f,total\n";
        for (size_t i = 0; i < res.history.size(); ++i) {
            const LossBreakdown& b = res.history[i];
            csv << i + 1 << "," << fmt_double(b.adv) << "," << fmt_double(b.cc) << ","
                << fmt_double(b.h2c) << "," << fmt_double(b.sm) << "," << fmt_double(b.f) << ","
                << fmt_double(b.total) << "\n";
        }
    }

    json rep;
    rep["command"] = "align";
    rep["tag"] = ablation_tag(cfg.ablation);
    rep["seed"] = cfg.seed;
    rep["curvature"] = cfg.curvature.c;
    rep["iterations"] = cfg.iterations;
    rep["visible"] = o.visible;
    rep["thermal"] = o.thermal;
    rep["final_loss"] = breakdown_json(res.final_loss);
    rep["mean_displacement_t2v"] = mean_displacement(res.field_t2v);
    rep["mean_displacement_v2t"] = mean_displacement(res.field_v2t);
    std::ofstream out(join(o.common.out_dir, "report.json"));
    if (!out) throw IoError("cannot write report.json");
    out << rep.dump(2) << "\n";
    std::cout << "alignment report tag=" << ablation_tag(cfg.ablation)
              << " total=" << res.final_loss.total << "\n";
    return 0;
}

// ---- eval ----

struct EvalOpts {
    CommonOpts common;
    std::string result, reference;
    double quantile = 0.90;
    std::string label = "result_vs_reference";
    std::string csv_name = "metrics.csv";
    std::string json_name = "metrics.json";
};

json metric_or_null(const std::optional<double>& v) {
    return v.has_value() ? json(*v) : json(nullptr);
}

std::string csv_field(const std::optional<double>& v) {
    return v.has_value() ? fmt_double(*v) : "null";
}

int cmd_eval(const EvalOpts& o) {
    ensure_dir(o.common.out_dir);
    Grid result = read_pgm(o.result);
    Grid reference = read_pgm(o.reference);
    MetricsReport rep = evaluate(result, reference, o.quantile);

    json j;
    j["command"] = "eval";
    j["label"] = o.label;
    j["result"] = o.result;
    j["reference"] = o.reference;
    j["quantile"] = o.quantile;
    j["hd"] = metric_or_null(rep.hd);
    j["hd95"] = metric_or_null(rep.hd95);
    j["assd"] = metric_or_null(rep.assd);
    j["dsc"] = rep.dsc;
    j["mee"] = rep.mee;
    j["sf"] = rep.sf;
    j["en"] = rep.en;
    std::ofstream out(join(o.common.out_dir, o.json_name));
    if (!out) throw IoError("cannot write " + o.json_name);
    out << j.dump(2) << "\n";

    std::string csv_path = join(o.common.out_dir, o.csv_name);
    bool existed = fs::exists(csv_path);
    std::ofstream csv(csv_path, std::ios::app);
    if (!csv) throw IoError("cannot append to " + o.csv_name);
    if (!existed) csv << "label,result,reference,hd,hd95,assd,dsc,mee,sf,en\n";
    csv << o.label << "," << o.result << "," << o.reference << "," << csv_field(rep.hd) << ","
        << csv_field(rep.hd95) << "," << csv_field(rep.assd) << "," << fmt_double(rep.dsc) << ","
        << fmt_double(rep.mee) << "," << fmt_double(rep.sf) << "," << fmt_double(rep.en) << "\n";

    std::cout << j.dump(2) << "\n";
    return 0;
}

// ---- theorem ----

struct TheoremOpts {
    CommonOpts common;
    int points = 25;
};

int cmd_theorem(const TheoremOpts& o) {
    ensure_dir(o.common.out_dir);
    std::vector<double> norms = default_theorem_norms();
    if (o.points != static_cast<int>(norms.size())) {
        // custom resolution: dense linear sweep ending at 0.999
        if (o.points < 2) throw CLI::ValidationError("--points must be >= 2");
        norms.clear();
        for (int i = 0; i < o.points; ++i)
            norms.push_back(0.999 * static_cast<double>(i) / static_cast<double>(o.points - 1));
    }
    std::vector<TheoremRow> rows = theorem_sweep(norms);

    std::ofstream csv(join(o.common.out_dir, "theorem.csv"));
    if (!csv) throw IoError("cannot write theorem.csv");
    csv << "norm,analytic_ratio,measured_ratio,taylor_rel_err\n";
    bool within = true, monotone = true;
    for (size_t i = 0; i < rows.size(); ++i) {
        const TheoremRow& r = rows[i];
        csv << fmt_double(r.norm) << "," << fmt_double(r.analytic_ratio) << ","
            << fmt_double(r.measured_ratio) << "," << fmt_double(r.taylor_rel_err) << "\n";
        if (std::fabs(r.measured_ratio - r.analytic_ratio) > 0.02 * r.analytic_ratio)
            within = false;
        if (i > 0 && !(r.measured_ratio > rows[i - 1].measured_ratio)) monotone = false;
    }
    std::cout << "sensitivity sweep over " << rows.size() << " norms: ratio at 0 = "
              << rows.front().analytic_ratio << ", at " << rows.back().norm << " = "
              << rows.back().analytic_ratio << "\n";
    std::cout << "measured-vs-analytic within 2%: " << (within ? "yes" : "NO")
              << "; strictly increasing: " << (monotone ? "yes" : "NO") << "\n";
    return within && monotone ? 0 : 3;
}

void add_common(CLI::App* app, CommonOpts& c, CLI::Option*& seed_opt, CLI::Option*& curv_opt,
                CLI::Option*& iter_opt, CLI::Option*& ablate_opt) {
    seed_opt = app->add_option("--seed", c.seed, "RNG seed");
    app->add_option("--config", c.config, "JSON config file (flags override it)");
    app->add_option("--out-dir", c.out_dir, "output directory");
    curv_opt = app->add_option("--curvature", c.curvature, "ball curvature c");
    iter_opt = app->add_option("--iterations", c.iterations, "optimization iterations");
    ablate_opt = app->add_option(
        "--ablate", c.ablate, "euclidean_h2c | disable_cycle | h2c_pixel_only | h2c_edge_only");
}

void apply_common_config(const CommonOpts& c, const json& j, CLI::Option* seed_opt,
                         CLI::Option* curv_opt, CLI::Option* iter_opt, CLI::Option* ablate_opt,
                         CommonOpts& out) {
    out = c;
    apply_config(j, seed_opt, "seed", out.seed);
    apply_config(j, curv_opt, "curvature", out.curvature);
    apply_config(j, iter_opt, "iterations", out.iterations);
    apply_config(j, ablate_opt, "ablate", out.ablate);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"hyperbolic cycle alignment toolkit"};
    app.require_subcommand(1);

    SynthOpts so;
    CLI::Option *so_seed, *so_curv, *so_iter, *so_abl;
    CLI::App* synth = app.add_subcommand("synth", "generate a misaligned synthetic scene pair");
    add_common(synth, so.common, so_seed, so_curv, so_iter, so_abl);
    synth->add_option("--height", so.height, "image height");
    synth->add_option("--width", so.width, "image width");
    synth->add_option("--shapes", so.shapes, "number of shapes");
    CLI::Option* mag_opt =
        synth->add_option("--magnitude", so.magnitude, "nonlinear warp magnitude in px");
    synth->add_option("--rigid", so.rigid,
                      "use a rigid horizontal shift of this fraction of the width instead");
    synth->add_option("--which", so.which, "which modality to misalign: t | v");

    AlignOpts ao;
    CLI::Option *ao_seed, *ao_curv, *ao_iter, *ao_abl;
    CLI::App* align = app.add_subcommand("align", "register and fuse a pair of PGM images");
    add_common(align, ao.common, ao_seed, ao_curv, ao_iter, ao_abl);
    align->add_option("--visible", ao.visible, "visible image (PGM)")->required();
    align->add_option("--thermal", ao.thermal, "thermal image (PGM)")->required();

    EvalOpts eo;
    CLI::Option *eo_seed, *eo_curv, *eo_iter, *eo_abl;
    CLI::App* eval = app.add_subcommand("eval", "compute the seven metrics for a result/reference pair");
    add_common(eval, eo.common, eo_seed, eo_curv, eo_iter, eo_abl);
    eval->add_option("--result", eo.result, "result image (PGM)")->required();
    eval->add_option("--reference", eo.reference, "reference image (PGM)")->required();
    eval->add_option("--quantile", eo.quantile, "edge binarization quantile");
    eval->add_option("--label", eo.label, "row label for the CSV");
    eval->add_option("--csv", eo.csv_name, "CSV file name (appended)");
    eval->add_option("--json", eo.json_name, "JSON report file name");

    TheoremOpts to;
    CLI::Option *to_seed, *to_curv, *to_iter, *to_abl;
    CLI::App* theorem =
        app.add_subcommand("theorem", "verify the hyperbolic sensitivity ratio sweep");
    add_common(theorem, to.common, to_seed, to_curv, to_iter, to_abl);
    theorem->add_option("--points", to.points, "number of sweep points");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (synth->parsed()) {
            json j = load_config(so.common.config);
            apply_common_config(so.common, j, so_seed, so_curv, so_iter, so_abl, so.common);
            apply_config(j, mag_opt, "magnitude", so.magnitude);
            return cmd_synth(so);
        }
        if (align->parsed()) {
            json j = load_config(ao.common.config);
            apply_common_config(ao.common, j, ao_seed, ao_curv, ao_iter, ao_abl, ao.common);
            return cmd_align(ao);
        }
        if (eval->parsed()) {
            json j = load_config(eo.common.config);
            apply_common_config(eo.common, j, eo_seed, eo_curv, eo_iter, eo_abl, eo.common);
            return cmd_eval(eo);
        }
        if (theorem->parsed()) {
            json j = load_config(to.common.config);
            apply_common_config(to.common, j, to_seed, to_curv, to_iter, to_abl, to.common);
            return cmd_theorem(to);
        }
    } catch (const CLI::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
