#include "cssr/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "json.hpp"

namespace cssr {

using ordered_json = nlohmann::ordered_json;

namespace {

constexpr uint64_t kShuffleTag = 0x5f0f7e;
constexpr uint64_t kTrainAugTag = 0xa06a06;
constexpr uint64_t kCalibAugTag = 0xca11b;

} // namespace

void TrainConfig::validate() const {
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (lr_initial <= 0.0) throw ConfigError("lr_initial must be positive");
    if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("momentum must be in [0,1)");
    if (lr_drop_factor <= 0.0) throw ConfigError("lr_drop_factor must be positive");
    for (size_t i = 0; i < lr_drop_epochs.size(); ++i) {
        if (lr_drop_epochs[i] < 0 || lr_drop_epochs[i] >= epochs)
            throw ConfigError("lr_drop_epochs entries must lie in [0, epochs)");
        if (i > 0 && lr_drop_epochs[i] <= lr_drop_epochs[i - 1])
            throw ConfigError("lr_drop_epochs must be strictly increasing");
    }
    backbone.validate();
    head.validate();
}

std::string TrainConfig::to_json() const {
    ordered_json j;
    j["epochs"] = epochs;
    j["batch_size"] = batch_size;
    j["lr_initial"] = lr_initial;
    j["lr_drop_epochs"] = lr_drop_epochs;
    j["lr_drop_factor"] = lr_drop_factor;
    j["momentum"] = momentum;
    j["seed"] = seed;
    j["precision"] = precision == Precision::f64 ? "f64" : "f32";
    j["backbone"] = {{"preset", backbone_preset_name(backbone.preset)},
                     {"feature_dim", backbone.feature_dim}};
    j["head"] = {{"mode", head_mode_name(head.mode)},
                 {"gamma", head.gamma},
                 {"error_norm", error_norm_name(head.error_norm)},
                 {"strategy", strategy_name(head.strategy)},
                 {"num_classes", head.num_classes},
                 {"latent_dim", head.latent_dim},
                 {"reg_weight", head.reg_weight}};
    std::vector<std::string> ops;
    for (AugmentOp op : augment.enabled) ops.push_back(augment_op_name(op));
    j["augment"] = {{"enabled", ops},
                    {"max_ops", augment.max_ops},
                    {"brightness", {augment.brightness_lo, augment.brightness_hi}},
                    {"contrast", {augment.contrast_lo, augment.contrast_hi}},
                    {"rotate", {augment.rotate_lo, augment.rotate_hi}},
                    {"shear", {augment.shear_lo, augment.shear_hi}},
                    {"seed", augment.seed}};
    j["score_weights"] = score_weights;
    j["known_classes"] = known_classes;
    return j.dump(2);
}

TrainConfig TrainConfig::from_json(const std::string& text) {
    ordered_json j;
    try {
        j = ordered_json::parse(text);
    } catch (const std::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    TrainConfig c;
    try {
        c.epochs = j.at("epochs").get<int>();
        c.batch_size = j.at("batch_size").get<int>();
        c.lr_initial = j.at("lr_initial").get<double>();
        c.lr_drop_epochs = j.at("lr_drop_epochs").get<std::vector<int>>();
        c.lr_drop_factor = j.at("lr_drop_factor").get<double>();
        c.momentum = j.at("momentum").get<double>();
        c.seed = j.at("seed").get<uint64_t>();
        c.precision = j.at("precision").get<std::string>() == "f32" ? Precision::f32 : Precision::f64;
        const auto& b = j.at("backbone");
        c.backbone.preset = backbone_preset_from_string(b.at("preset").get<std::string>());
        c.backbone.feature_dim = b.at("feature_dim").get<int>();
        const auto& h = j.at("head");
        c.head.mode = head_mode_from_string(h.at("mode").get<std::string>());
        c.head.gamma = h.at("gamma").get<double>();
        c.head.error_norm = error_norm_from_string(h.at("error_norm").get<std::string>());
        c.head.strategy = strategy_from_string(h.at("strategy").get<std::string>());
        c.head.num_classes = h.at("num_classes").get<int>();
        c.head.latent_dim = h.at("latent_dim").get<int>();
        c.head.reg_weight = h.at("reg_weight").get<double>();
        const auto& a = j.at("augment");
        for (const auto& name : a.at("enabled")) {
            std::string s = name.get<std::string>();
            if (s == "brightness") c.augment.enabled.push_back(AugmentOp::Brightness);
            else if (s == "contrast") c.augment.enabled.push_back(AugmentOp::Contrast);
            else if (s == "rotate") c.augment.enabled.push_back(AugmentOp::Rotate);
            else if (s == "shear") c.augment.enabled.push_back(AugmentOp::Shear);
            else if (s == "equalize") c.augment.enabled.push_back(AugmentOp::Equalize);
            else throw ConfigError("unknown augment op: " + s);
        }
        c.augment.max_ops = a.at("max_ops").get<int>();
        c.augment.brightness_lo = a.at("brightness")[0].get<double>();
        c.augment.brightness_hi = a.at("brightness")[1].get<double>();
        c.augment.contrast_lo = a.at("contrast")[0].get<double>();
        c.augment.contrast_hi = a.at("contrast")[1].get<double>();
        c.augment.rotate_lo = a.at("rotate")[0].get<double>();
        c.augment.rotate_hi = a.at("rotate")[1].get<double>();
        c.augment.shear_lo = a.at("shear")[0].get<double>();
        c.augment.shear_hi = a.at("shear")[1].get<double>();
        c.augment.seed = a.at("seed").get<uint64_t>();
        c.score_weights = j.at("score_weights").get<std::array<double, 3>>();
        c.known_classes = j.at("known_classes").get<std::vector<int>>();
    } catch (const ordered_json::exception& e) {
        throw ConfigError(std::string("config field error: ") + e.what());
    }
    return c;
}

TrainConfig TrainConfig::preset_gauss2d(HeadMode mode, uint64_t seed) {
    TrainConfig c;
    c.epochs = 50;
    c.batch_size = 64;
    c.lr_initial = 0.05;
    c.momentum = 0.9;
    c.seed = seed;
    c.backbone.preset = BackbonePreset::Mlp2d;
    c.backbone.feature_dim = 8;
    c.head.mode = mode;
    c.head.gamma = mode == HeadMode::Rcssr ? -0.1 : 0.1;
    c.head.num_classes = 4;
    c.head.latent_dim = 2;
    c.augment = AugmentSpec::none();
    return c;
}

TrainConfig TrainConfig::preset_image(HeadMode mode, uint64_t seed) {
    TrainConfig c;
    c.epochs = 10;
    c.batch_size = 64;
    c.lr_initial = 0.05;
    c.lr_drop_epochs = {8};
    c.lr_drop_factor = 10.0;
    c.momentum = 0.9;
    c.seed = seed;
    c.backbone.preset = BackbonePreset::SmallConv;
    c.backbone.feature_dim = 128;
    c.head.mode = mode;
    c.head.gamma = mode == HeadMode::Rcssr ? -0.1 : 0.1;
    c.head.num_classes = 6;
    c.head.latent_dim = 16;
    c.augment = AugmentSpec::all(seed);
    // glyph classes differ by less than a quarter turn; keep rotations gentle
    c.augment.rotate_lo = -15.0;
    c.augment.rotate_hi = 15.0;
    return c;
}

TrainConfig TrainConfig::preset_paper(HeadMode mode, uint64_t seed) {
    TrainConfig c = preset_image(mode, seed);
    c.epochs = 200;
    c.batch_size = 128;
    c.lr_initial = 0.4;
    c.lr_drop_epochs = {130, 190};
    c.head.latent_dim = 64;
    return c;
}

TrainResult train(const TrainConfig& config, const Dataset& data) {
    config.validate();
    if (data.empty()) throw ConfigError("train: empty dataset");
    for (const Sample& s : data) {
        if (s.label < 0 || s.label >= config.head.num_classes)
            throw ConfigError("train: label " + std::to_string(s.label) + " outside [0, " +
                              std::to_string(config.head.num_classes) + ")");
    }
    TrainResult result{Model::build(config.backbone, config.head, config.seed, config.precision), {}, 0};
    Model& model = result.model;
    Graph& g = model.graph;
    const double clamp_loss = -std::log(kLogFloor) - 1e-9;
    int n = static_cast<int>(data.size());

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        double lr = config.lr_initial;
        for (int d : config.lr_drop_epochs) {
            if (epoch >= d) lr /= config.lr_drop_factor;
        }
        Rng shuffle_rng(mix_seed(config.seed, kShuffleTag, static_cast<uint64_t>(epoch)));
        std::vector<int> perm = random_permutation(n, shuffle_rng);
        double epoch_loss = 0.0;
        int batches = 0;
        for (int start = 0; start < n; start += config.batch_size) {
            int end = std::min(n, start + config.batch_size);
            try {
                g.clear_tape();
                std::vector<NodeId> losses;
                losses.reserve(static_cast<size_t>(end - start));
                for (int b = start; b < end; ++b) {
                    int idx = perm[static_cast<size_t>(b)];
                    const Sample& s = data[static_cast<size_t>(idx)];
                    Tensor input = augment_image(
                        s.input, config.augment,
                        mix_seed(mix_seed(config.seed, kTrainAugTag), static_cast<uint64_t>(epoch),
                                 static_cast<uint64_t>(idx)));
                    losses.push_back(model.sample_loss(g.constant(std::move(input)), s.label));
                }
                for (NodeId l : losses) {
                    if (g.value(l)[0] >= clamp_loss) ++result.clamped_probabilities;
                }
                NodeId batch_loss = losses.size() == 1 ? losses[0] : g.mean(g.concat(losses));
                epoch_loss += g.value(batch_loss)[0];
                ++batches;
                g.backward(batch_loss);
                g.sgd_step(lr, config.momentum);
            } catch (const NumericError& e) {
                throw NumericError("training diverged at epoch " + std::to_string(epoch) + " batch " +
                                   std::to_string(start / config.batch_size) + ": " + e.what());
            }
        }
        result.epoch_losses.push_back(epoch_loss / std::max(1, batches));
    }
    g.clear_tape();
    return result;
}

double closed_accuracy(const Model& model, const Dataset& data) {
    if (data.empty()) throw ConfigError("closed_accuracy: empty dataset");
    int64_t correct = 0;
    for (const Sample& s : data) {
        if (model.predict(s.input) == s.label) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(data.size());
}

namespace {

RawScores raw_scores_for(const Model& model, const ScoreStats& stats, const Model::Evaluation& ev) {
    RawScores rs;
    HeadMode mode = model.head.config().mode;
    int cls = ev.out.predicted;
    rs.s1 = score_recon(ev.feature, ev.out, cls, mode, &rs.degenerate);
    rs.s2 = score_first_order(ev.feature, cls, stats);
    rs.s3 = score_gram(ev.feature, cls, stats);
    return rs;
}

} // namespace

ScoreStats build_score_stats(const Model& model, const Dataset& train_data, const AugmentSpec& augment,
                             uint64_t seed, const std::array<double, 3>& weights, double tpr_target) {
    if (train_data.empty()) throw ConfigError("build_score_stats: empty training set");
    int m = model.head.config().num_classes;
    int d = model.backbone.config().feature_dim;

    // step 1: statistics from the raw training set
    std::vector<Model::Evaluation> raw_evals;
    raw_evals.reserve(train_data.size());
    std::vector<ClassifiedFeature> feats;
    feats.reserve(train_data.size());
    for (const Sample& s : train_data) {
        raw_evals.push_back(model.evaluate(s.input));
        feats.push_back({raw_evals.back().feature, raw_evals.back().out.predicted});
    }
    ScoreStats stats = collect_class_stats(feats, m, d, 8);
    stats.weights = weights;

    // step 2: normalization constants from one augmented pass
    std::vector<RawScores> aug_scores;
    aug_scores.reserve(train_data.size());
    for (size_t i = 0; i < train_data.size(); ++i) {
        Tensor input = augment_image(train_data[i].input, augment,
                                     mix_seed(mix_seed(seed, kCalibAugTag), static_cast<uint64_t>(i)));
        aug_scores.push_back(raw_scores_for(model, stats, model.evaluate(input)));
    }
    calibrate_scores(aug_scores, stats);

    // threshold at the target acceptance rate on the raw training scores
    std::vector<double> fused;
    fused.reserve(raw_evals.size());
    for (const Model::Evaluation& ev : raw_evals) {
        fused.push_back(fused_score(raw_scores_for(model, stats, ev), stats));
    }
    stats.threshold = fit_threshold(fused, tpr_target);
    stats.has_threshold = true;
    return stats;
}

SampleDecision score_sample(const Model& model, const ScoreStats& stats, const Tensor& input) {
    if (!stats.calibrated || !stats.has_threshold)
        throw ConfigError("score_sample: statistics are not calibrated/thresholded");
    Model::Evaluation ev = model.evaluate(input);
    SampleDecision d;
    d.predicted = ev.out.predicted;
    d.raw = raw_scores_for(model, stats, ev);
    d.fused = fused_score(d.raw, stats);
    d.accepted = accept_as_known(d.fused, stats.threshold);
    d.final_label = d.accepted ? d.predicted : model.head.config().num_classes;
    return d;
}

std::vector<SampleDecision> score_dataset(const Model& model, const ScoreStats& stats,
                                          const Dataset& data) {
    std::vector<SampleDecision> out;
    out.reserve(data.size());
    for (const Sample& s : data) out.push_back(score_sample(model, stats, s.input));
    return out;
}

EvalReport evaluate_open_set(const Model& model, const ScoreStats& stats, const OpenSetTestData& test,
                             std::optional<int> total_test_classes) {
    if (test.known.empty()) throw ConfigError("evaluate_open_set: no known test samples");
    int m = model.head.config().num_classes;

    std::vector<SampleDecision> known_dec = score_dataset(model, stats, test.known);
    std::vector<SampleDecision> unknown_dec = score_dataset(model, stats, test.unknown);

    EvalReport report;
    report.threshold = stats.threshold;
    report.known_count = static_cast<int>(test.known.size());
    report.unknown_count = static_cast<int>(test.unknown.size());

    int64_t correct = 0;
    for (size_t i = 0; i < known_dec.size(); ++i) {
        if (known_dec[i].predicted == test.known[i].label) ++correct;
    }
    report.closed_accuracy = static_cast<double>(correct) / static_cast<double>(known_dec.size());

    std::vector<ScoredSample> samples;
    samples.reserve(known_dec.size() + unknown_dec.size());
    for (size_t i = 0; i < known_dec.size(); ++i) {
        samples.push_back({known_dec[i].fused, true, test.known[i].label, known_dec[i].predicted});
    }
    for (const SampleDecision& d : unknown_dec) samples.push_back({d.fused, false, -1, d.predicted});

    if (!unknown_dec.empty()) {
        std::vector<double> kf, uf;
        for (const SampleDecision& d : known_dec) kf.push_back(d.fused);
        for (const SampleDecision& d : unknown_dec) uf.push_back(d.fused);
        report.auroc = auroc(kf, uf);
        report.dtacc = dtacc(kf, uf);
        report.auin = aupr(kf, uf, PositiveSide::In);
        report.auout = aupr(kf, uf, PositiveSide::Out);
        report.tnr_at_tpr95 = tnr_at_tpr(kf, uf, 0.95);
        report.oscr = oscr(samples);

        auto breakdown = [&](const char* name, auto getter) {
            std::vector<double> k, u;
            for (const SampleDecision& d : known_dec) k.push_back(getter(d));
            for (const SampleDecision& d : unknown_dec) u.push_back(getter(d));
            report.score_aurocs.push_back({name, auroc(k, u)});
        };
        breakdown("s1", [](const SampleDecision& d) { return d.raw.s1; });
        breakdown("s2", [](const SampleDecision& d) { return d.raw.s2; });
        breakdown("s3", [](const SampleDecision& d) { return d.raw.s3; });
        breakdown("fused", [](const SampleDecision& d) { return d.fused; });
    }
    report.macro_f1 = macro_f1_open(samples, stats.threshold, m);

    int n_test_classes = total_test_classes.value_or(m + (test.unknown.empty() ? 0 : 1));
    report.openness = openness(m, std::max(n_test_classes, m), m);
    return report;
}

ExperimentReport aggregate_trials(const std::vector<EvalReport>& trials) {
    if (trials.empty()) throw ConfigError("aggregate_trials: no trials");
    ExperimentReport out;
    out.trials = trials;
    auto add = [&](const std::string& name, auto getter) {
        std::vector<double> v;
        for (const EvalReport& r : trials) {
            auto x = getter(r);
            if (!x.has_value()) return; // absent in some trial: skip the aggregate
            v.push_back(*x);
        }
        double mean = 0.0;
        for (double x : v) mean += x;
        mean /= static_cast<double>(v.size());
        double var = 0.0;
        for (double x : v) var += (x - mean) * (x - mean);
        double sd = v.size() > 1 ? std::sqrt(var / static_cast<double>(v.size() - 1)) : 0.0;
        out.mean_std.push_back({name, {mean, sd}});
    };
    add("closed_accuracy",
        [](const EvalReport& r) { return std::optional<double>(r.closed_accuracy); });
    add("auroc", [](const EvalReport& r) { return r.auroc; });
    add("dtacc", [](const EvalReport& r) { return r.dtacc; });
    add("auin", [](const EvalReport& r) { return r.auin; });
    add("auout", [](const EvalReport& r) { return r.auout; });
    add("tnr_at_tpr95", [](const EvalReport& r) { return r.tnr_at_tpr95; });
    add("macro_f1", [](const EvalReport& r) { return r.macro_f1; });
    add("oscr", [](const EvalReport& r) { return r.oscr; });
    return out;
}

namespace {

ordered_json report_json_obj(const EvalReport& r) {
    ordered_json j;
    j["closed_accuracy"] = r.closed_accuracy;
    auto put = [&](const char* name, const std::optional<double>& v) {
        if (v.has_value()) j[name] = *v;
    };
    put("auroc", r.auroc);
    put("dtacc", r.dtacc);
    put("auin", r.auin);
    put("auout", r.auout);
    put("tnr_at_tpr95", r.tnr_at_tpr95);
    put("macro_f1", r.macro_f1);
    put("oscr", r.oscr);
    put("openness", r.openness);
    j["threshold"] = r.threshold;
    j["known_count"] = r.known_count;
    j["unknown_count"] = r.unknown_count;
    if (!r.score_aurocs.empty()) {
        ordered_json b;
        for (const auto& [name, v] : r.score_aurocs) b[name] = v;
        j["score_aurocs"] = b;
    }
    return j;
}

} // namespace

std::string report_to_json(const EvalReport& report) { return report_json_obj(report).dump(2); }

std::string report_summary(const EvalReport& report) {
    std::string out;
    char buf[128];
    auto line = [&](const char* name, const std::optional<double>& v) {
        if (!v.has_value()) {
            std::snprintf(buf, sizeof(buf), "%-16s absent\n", name);
        } else {
            std::snprintf(buf, sizeof(buf), "%-16s %.6f\n", name, *v);
        }
        out += buf;
    };
    line("closed_accuracy", report.closed_accuracy);
    line("auroc", report.auroc);
    line("dtacc", report.dtacc);
    line("auin", report.auin);
    line("auout", report.auout);
    line("tnr_at_tpr95", report.tnr_at_tpr95);
    line("macro_f1", report.macro_f1);
    line("oscr", report.oscr);
    line("openness", report.openness);
    line("threshold", report.threshold);
    for (const auto& [name, v] : report.score_aurocs) {
        std::snprintf(buf, sizeof(buf), "auroc[%-5s]     %.6f\n", name, v);
        out += buf;
    }
    return out;
}

std::string experiment_to_json(const ExperimentReport& report) {
    ordered_json j;
    j["trials"] = ordered_json::array();
    for (const EvalReport& r : report.trials) j["trials"].push_back(report_json_obj(r));
    ordered_json agg;
    for (const auto& [name, ms] : report.mean_std) {
        agg[name] = {{"mean", ms.first}, {"std", ms.second}};
    }
    j["aggregate"] = agg;
    return j.dump(2);
}

OpenSpaceMap render_open_space_map(const Model& model, const ScoreStats& stats,
                                   const std::array<double, 4>& bounds, int resolution) {
    if (model.backbone.config().preset != BackbonePreset::Mlp2d)
        throw ConfigError("render_open_space_map: needs the 2-d backbone");
    if (resolution < 2) throw ConfigError("render_open_space_map: resolution must be >= 2");
    for (double b : bounds) {
        if (!std::isfinite(b)) throw ConfigError("render_open_space_map: bounds must be finite");
    }
    if (bounds[0] >= bounds[1] || bounds[2] >= bounds[3])
        throw ConfigError("render_open_space_map: bounds must satisfy x0 < x1 and y0 < y1");
    OpenSpaceMap map;
    map.resolution = resolution;
    map.bounds = bounds;
    map.accepted.assign(static_cast<size_t>(resolution) * resolution, 0);
    map.predicted.assign(static_cast<size_t>(resolution) * resolution, -1);
    double dx = (bounds[1] - bounds[0]) / resolution;
    double dy = (bounds[3] - bounds[2]) / resolution;
    for (int row = 0; row < resolution; ++row) {
        double y = bounds[3] - (row + 0.5) * dy; // row 0 at the top of the map
        for (int col = 0; col < resolution; ++col) {
            double x = bounds[0] + (col + 0.5) * dx;
            SampleDecision d = score_sample(model, stats, Tensor({2}, {x, y}));
            size_t i = static_cast<size_t>(row) * resolution + col;
            map.accepted[i] = d.accepted ? 255 : 0;
            map.predicted[i] = d.predicted;
        }
    }
    return map;
}

void write_pgm(const std::string& path, int width, int height, const std::vector<uint8_t>& pixels) {
    if (static_cast<size_t>(width) * height != pixels.size())
        throw ConfigError("write_pgm: pixel count does not match dimensions");
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot write " + path);
    f << "P5\n" << width << " " << height << "\n255\n";
    f.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
    if (!f) throw DataError("write failed for " + path);
}

std::vector<uint8_t> class_map_pixels(const OpenSpaceMap& map, int num_classes) {
    std::vector<uint8_t> out(map.predicted.size(), 0);
    int denom = std::max(1, num_classes - 1);
    for (size_t i = 0; i < map.predicted.size(); ++i) {
        int c = map.predicted[i];
        out[i] = static_cast<uint8_t>(60 + (195 * c) / denom);
    }
    return out;
}

void save_model(const std::string& path, const Model& model, const TrainConfig& config,
                const ScoreStats* stats) {
    std::vector<std::pair<std::string, Tensor>> tensors;
    for (int i = 0; i < model.graph.param_count(); ++i) {
        const Parameter& p = model.graph.param(i);
        tensors.push_back({p.name, p.value});
    }
    write_checkpoint(path, config.to_json(), tensors, stats);
}

void load_parameters_into(Model& model, const std::vector<std::pair<std::string, Tensor>>& tensors) {
    if (static_cast<int>(tensors.size()) != model.graph.param_count())
        throw DataError("checkpoint holds " + std::to_string(tensors.size()) + " parameters, model expects " +
                        std::to_string(model.graph.param_count()));
    for (const auto& [name, t] : tensors) {
        int idx = model.graph.find_param(name);
        if (idx < 0) throw DataError("checkpoint parameter " + name + " does not exist in the model");
        Parameter& p = model.graph.param(idx);
        if (!p.value.same_shape(t))
            throw DataError("checkpoint parameter " + name + " has shape " + t.shape_str() +
                            ", model expects " + p.value.shape_str());
        p.value = t;
        p.velocity.fill(0.0);
        p.grad.fill(0.0);
    }
}

LoadedModel load_model(const std::string& path) {
    CheckpointContents c = read_checkpoint(path);
    TrainConfig config = TrainConfig::from_json(c.config_json);
    config.validate();
    LoadedModel out{Model::build(config.backbone, config.head, config.seed, config.precision),
                    std::move(config), std::move(c.stats)};
    load_parameters_into(out.model, c.tensors);
    return out;
}

} // namespace cssr
