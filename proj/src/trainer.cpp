#include "fdrl/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>

#include "fdrl/rng.hpp"

namespace fdrl {

ModelDims TrainConfig::model_dims() const {
  return ModelDims{d_in, resolved_hidden(), d, classes, heads};
}

AdamWConfig TrainConfig::optimizer() const {
  return AdamWConfig{lr, adam_beta1, adam_beta2, adam_eps, weight_decay};
}

void TrainConfig::validate() const {
  model_dims().validate();
  if (alpha < 0 || beta < 0 || gamma < 0)
    throw ConfigError("trade-off parameters alpha/beta/gamma must be non-negative");
  if (lr <= 0) throw ConfigError("lr must be positive");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (lambda_value < 0) throw ConfigError("lambda_value must be >= 0");
  if (grad_clip < 0) throw ConfigError("grad_clip must be >= 0");
}

Toggles ablation_toggles(const std::string& name) {
  Toggles t;
  if (name == "none" || name == "s0") return t;
  if (name == "s1") {
    t.alignment_global = t.alignment_local = false;
    t.disparity_adv = t.disparity_orth = false;
    return t;
  }
  if (name == "s2") {
    t.alignment_global = false;
    return t;
  }
  if (name == "s3") {
    t.alignment_local = false;
    return t;
  }
  if (name == "s4") {
    t.alignment_global = t.alignment_local = false;
    return t;
  }
  if (name == "s5") {
    t.disparity_adv = t.disparity_orth = false;
    return t;
  }
  if (name == "s6") {
    t.predictor = false;
    return t;
  }
  throw ConfigError("unknown ablation '" + name + "' (expected none or s1..s6)");
}

double lambda_at_epoch(const TrainConfig& cfg, int epoch) {
  if (cfg.lambda_schedule == LambdaSchedule::Constant) return cfg.lambda_value;
  const double p = cfg.epochs > 1
                       ? static_cast<double>(epoch) / static_cast<double>(cfg.epochs - 1)
                       : 1.0;
  return 2.0 / (1.0 + std::exp(-10.0 * p)) - 1.0;
}

const std::vector<std::string>& train_config_keys() {
  static const std::vector<std::string> keys = {
      "d_in", "d", "hidden", "classes", "heads",
      "alpha", "beta", "gamma",
      "lr", "weight_decay", "adam_beta1", "adam_beta2", "adam_eps",
      "batch_size", "epochs", "seed",
      "alignment_global", "alignment_local", "disparity_adv", "disparity_orth", "predictor",
      "ablation", "lambda_schedule", "lambda_value", "grad_clip", "select_best_epoch",
      // run context recorded in echoes; not consumed by the trainer itself
      "command", "data", "out", "fold", "checkpoint"};
  return keys;
}

TrainConfig train_config_from(const Config& cfg) {
  cfg.require_known_keys(train_config_keys());
  TrainConfig t;
  t.d_in = cfg.get_int("d_in", t.d_in);
  t.d = cfg.get_int("d", t.d);
  t.hidden = cfg.get_int("hidden", t.hidden);
  t.classes = cfg.get_int("classes", t.classes);
  t.heads = cfg.get_int("heads", t.heads);
  t.alpha = cfg.get_double("alpha", t.alpha);
  t.beta = cfg.get_double("beta", t.beta);
  t.gamma = cfg.get_double("gamma", t.gamma);
  t.lr = cfg.get_double("lr", t.lr);
  t.weight_decay = cfg.get_double("weight_decay", t.weight_decay);
  t.adam_beta1 = cfg.get_double("adam_beta1", t.adam_beta1);
  t.adam_beta2 = cfg.get_double("adam_beta2", t.adam_beta2);
  t.adam_eps = cfg.get_double("adam_eps", t.adam_eps);
  t.batch_size = cfg.get_int("batch_size", t.batch_size);
  t.epochs = cfg.get_int("epochs", t.epochs);
  t.seed = cfg.get_u64("seed", t.seed);
  t.toggles.alignment_global = cfg.get_bool("alignment_global", true);
  t.toggles.alignment_local = cfg.get_bool("alignment_local", true);
  t.toggles.disparity_adv = cfg.get_bool("disparity_adv", true);
  t.toggles.disparity_orth = cfg.get_bool("disparity_orth", true);
  t.toggles.predictor = cfg.get_bool("predictor", true);
  if (cfg.has("ablation")) t.toggles = ablation_toggles(*cfg.get("ablation"));
  const std::string sched = cfg.get_string("lambda_schedule", "dann");
  if (sched == "dann") t.lambda_schedule = LambdaSchedule::Dann;
  else if (sched == "constant") t.lambda_schedule = LambdaSchedule::Constant;
  else throw ConfigError("lambda_schedule must be dann or constant, got '" + sched + "'");
  t.lambda_value = cfg.get_double("lambda_value", t.lambda_value);
  t.grad_clip = cfg.get_double("grad_clip", t.grad_clip);
  t.select_best_epoch = cfg.get_bool("select_best_epoch", t.select_best_epoch);
  t.validate();
  return t;
}

namespace {
std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}
}  // namespace

Config config_from(const TrainConfig& t) {
  Config cfg;
  cfg.set("d_in", std::to_string(t.d_in));
  cfg.set("d", std::to_string(t.d));
  cfg.set("hidden", std::to_string(t.resolved_hidden()));
  cfg.set("classes", std::to_string(t.classes));
  cfg.set("heads", std::to_string(t.heads));
  cfg.set("alpha", num(t.alpha));
  cfg.set("beta", num(t.beta));
  cfg.set("gamma", num(t.gamma));
  cfg.set("lr", num(t.lr));
  cfg.set("weight_decay", num(t.weight_decay));
  cfg.set("adam_beta1", num(t.adam_beta1));
  cfg.set("adam_beta2", num(t.adam_beta2));
  cfg.set("adam_eps", num(t.adam_eps));
  cfg.set("batch_size", std::to_string(t.batch_size));
  cfg.set("epochs", std::to_string(t.epochs));
  cfg.set("seed", std::to_string(t.seed));
  cfg.set("alignment_global", t.toggles.alignment_global ? "true" : "false");
  cfg.set("alignment_local", t.toggles.alignment_local ? "true" : "false");
  cfg.set("disparity_adv", t.toggles.disparity_adv ? "true" : "false");
  cfg.set("disparity_orth", t.toggles.disparity_orth ? "true" : "false");
  cfg.set("predictor", t.toggles.predictor ? "true" : "false");
  cfg.set("lambda_schedule", t.lambda_schedule == LambdaSchedule::Dann ? "dann" : "constant");
  cfg.set("lambda_value", num(t.lambda_value));
  cfg.set("grad_clip", num(t.grad_clip));
  cfg.set("select_best_epoch", t.select_best_epoch ? "true" : "false");
  return cfg;
}

namespace {

void check_data_compatible(const TrainConfig& cfg, const Dataset& ds) {
  if (ds.manifest.d_in != cfg.d_in)
    throw ValidationError("config d_in " + std::to_string(cfg.d_in) + " does not match data d_in " +
                          std::to_string(ds.manifest.d_in));
  if (ds.manifest.classes != cfg.classes)
    throw ValidationError("config classes " + std::to_string(cfg.classes) +
                          " does not match data classes " + std::to_string(ds.manifest.classes));
}

void check_finite(double v, const std::string& term, long step) {
  if (!std::isfinite(v))
    throw NumericError(term + " is non-finite at step " + std::to_string(step));
}

// Parameters the optimizer owns. Branches that are toggled off keep their
// initial values and never receive updates or decay.
std::vector<Param*> active_params(FdrlModel& model, const Toggles& t) {
  std::vector<Param*> out;
  model.shared_encoder.collect(out);
  model.private_a.collect(out);
  model.private_t.collect(out);
  if (t.alignment_global) model.align_global.collect(out);
  if (t.alignment_local)
    for (Mlp2& d : model.align_local) d.collect(out);
  if (t.disparity_adv) model.modality_disc.collect(out);
  if (t.alignment_local || t.predictor) model.predictor.collect(out);
  model.fusion.collect(out);
  return out;
}

Eigen::MatrixXd detached_probs(Tape& tape, Tensor S, PredictorParams& pred) {
  return softmax_rows(predict_fine(tape, S, pred)).value();
}

}  // namespace

FoldResult train_fold(const TrainConfig& cfg, const Dataset& ds, int fold, std::ostream* diag) {
  cfg.validate();
  check_data_compatible(cfg, ds);
  FoldSplit split = kfold_split(ds, fold);

  FoldResult result;
  result.model = FdrlModel::init(cfg.model_dims(), cfg.seed);
  std::vector<Param*> params = active_params(result.model, cfg.toggles);
  AdamW opt(cfg.optimizer(), params);
  DynamicFactorState mu_state(cfg.classes);

  std::vector<std::pair<std::string, Eigen::MatrixXd>> best_values;
  double best_war = -1.0;

  long step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lambda = lambda_at_epoch(cfg, epoch);
    result.lambda_by_epoch.push_back(lambda);
    result.mu_by_epoch.push_back(mu_state.mu());

    for (const std::vector<int>& batch : train_batches(split, cfg.batch_size, cfg.seed, epoch)) {
      Eigen::MatrixXd H_a, H_t;
      std::vector<int> labels;
      gather_batch(ds, batch, H_a, H_t, labels);

      Tape tape;
      LatentPack pack = encode(tape, H_a, H_t, result.model.shared_encoder,
                               result.model.private_a, result.model.private_t);

      LossTerms terms;
      FusionOut fused = fuse(tape, pack, result.model.fusion);
      terms.task = loss_task(fused.logits, labels);

      LocalAlignLoss local;
      if (cfg.toggles.alignment_global)
        terms.global_align =
            loss_global_align(tape, pack.S_a, pack.S_t, result.model.align_global, lambda);
      if (cfg.toggles.alignment_local) {
        Eigen::MatrixXd probs_a = detached_probs(tape, pack.S_a, result.model.predictor);
        Eigen::MatrixXd probs_t = detached_probs(tape, pack.S_t, result.model.predictor);
        local = loss_local_align(tape, pack.S_a, pack.S_t, probs_a, probs_t,
                                 result.model.align_local, lambda);
        terms.local_mean = local.mean;
      }
      if (cfg.toggles.disparity_adv)
        terms.disparity_adv =
            loss_modality_adversarial(tape, pack, result.model.modality_disc);
      if (cfg.toggles.disparity_orth) terms.disparity_orth = loss_orthogonal(tape, pack);
      if (cfg.toggles.predictor)
        terms.predictor = loss_predictor(tape, pack, result.model.predictor, labels);

      const double mu = mu_state.mu();
      Tensor total = compose_total(tape, terms, mu, cfg.alpha, cfg.beta, cfg.gamma);

      LossReport rep;
      rep.step = step;
      rep.epoch = epoch;
      rep.mu = mu;
      rep.lambda = lambda;
      rep.L_task = terms.task.scalar();
      rep.L_g = terms.global_align.valid() ? terms.global_align.scalar() : 0.0;
      rep.L_l = terms.local_mean.valid() ? terms.local_mean.scalar() : 0.0;
      rep.L_p = terms.disparity_adv.valid() ? terms.disparity_adv.scalar() : 0.0;
      rep.L_d = terms.disparity_orth.valid() ? terms.disparity_orth.scalar() : 0.0;
      rep.L_f = terms.predictor.valid() ? terms.predictor.scalar() : 0.0;
      rep.L_total = total.scalar();
      check_finite(rep.L_task, "L_task", step);
      check_finite(rep.L_g, "L_g", step);
      check_finite(rep.L_l, "L_l", step);
      check_finite(rep.L_p, "L_p", step);
      check_finite(rep.L_d, "L_d", step);
      check_finite(rep.L_f, "L_f", step);
      check_finite(rep.L_total, "L_total", step);

      tape.backward(total);
      std::vector<Eigen::MatrixXd> grads;
      grads.reserve(params.size());
      for (Param* p : params) {
        if (p->lift_serial == tape.serial() && p->leaf.valid())
          grads.push_back(p->leaf.grad());
        else
          grads.push_back(Eigen::MatrixXd::Zero(p->value.rows(), p->value.cols()));
      }
      clip_global_norm(grads, cfg.grad_clip);
      opt.step(params, grads);

      if (cfg.toggles.alignment_global && cfg.toggles.alignment_local) {
        std::vector<double> per_class(local.per_class.size());
        for (std::size_t c = 0; c < local.per_class.size(); ++c)
          per_class[c] = local.per_class[c].scalar();
        mu_state.accumulate(rep.L_g, per_class, 2 * pack.batch(), local.class_mass);
      }

      if (cfg.toggles.alignment_local) rep.L_l_c.resize(local.per_class.size());
      for (std::size_t c = 0; c < rep.L_l_c.size(); ++c) rep.L_l_c[c] = local.per_class[c].scalar();
      result.loss_log.push_back(std::move(rep));
      ++step;
    }

    if (cfg.toggles.alignment_global && cfg.toggles.alignment_local) {
      if (!mu_state.update_mu() && diag)
        (*diag) << "note: mu update skipped at epoch " << epoch << " (degenerate distances)\n";
    }

    if (cfg.select_best_epoch) {
      MetricsReport m = evaluate(result.model, ds, split.test_indices);
      if (m.war > best_war) {
        best_war = m.war;
        best_values.clear();
        for (Param* p : result.model.params()) best_values.emplace_back(p->name, p->value);
      }
    }
    if (diag && (epoch == cfg.epochs - 1 || epoch % 10 == 0))
      (*diag) << "epoch " << epoch << " L_total " << result.loss_log.back().L_total << " mu "
              << mu_state.mu() << "\n";
  }

  if (cfg.select_best_epoch && !best_values.empty()) {
    std::vector<Param*> all = result.model.params();
    for (std::size_t i = 0; i < all.size(); ++i) all[i]->value = best_values[i].second;
  }

  result.metrics = evaluate(result.model, ds, split.test_indices);
  return result;
}

MetricsReport evaluate(FdrlModel& model, const Dataset& ds, const std::vector<int>& indices) {
  if (ds.manifest.d_in != model.dims.d_in)
    throw ValidationError("evaluate: data d_in " + std::to_string(ds.manifest.d_in) +
                          " does not match model d_in " + std::to_string(model.dims.d_in));
  std::vector<int> y_true, y_pred;
  y_true.reserve(indices.size());
  y_pred.reserve(indices.size());
  const std::size_t chunk = 256;
  for (std::size_t at = 0; at < indices.size(); at += chunk) {
    std::vector<int> part(indices.begin() + static_cast<std::ptrdiff_t>(at),
                          indices.begin() +
                              static_cast<std::ptrdiff_t>(std::min(indices.size(), at + chunk)));
    Eigen::MatrixXd H_a, H_t;
    std::vector<int> labels;
    gather_batch(ds, part, H_a, H_t, labels);
    Tape tape;
    LatentPack pack = encode(tape, H_a, H_t, model.shared_encoder, model.private_a,
                             model.private_t);
    FusionOut fused = fuse(tape, pack, model.fusion);
    const Eigen::MatrixXd& logits = fused.logits.value();
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
      Eigen::Index arg = 0;
      logits.row(r).maxCoeff(&arg);
      y_pred.push_back(static_cast<int>(arg));
      y_true.push_back(labels[static_cast<std::size_t>(r)]);
    }
  }
  return MetricsReport::from_predictions(y_true, y_pred, model.dims.classes);
}

Embeddings compute_embeddings(FdrlModel& model, const Dataset& ds,
                              const std::vector<int>& indices) {
  Embeddings e;
  const Eigen::Index n = static_cast<Eigen::Index>(indices.size());
  e.S_a.resize(n, model.dims.d);
  e.S_t.resize(n, model.dims.d);
  e.P_a.resize(n, model.dims.d);
  e.P_t.resize(n, model.dims.d);
  e.labels.reserve(indices.size());
  const std::size_t chunk = 256;
  Eigen::Index row_at = 0;
  for (std::size_t at = 0; at < indices.size(); at += chunk) {
    std::vector<int> part(indices.begin() + static_cast<std::ptrdiff_t>(at),
                          indices.begin() +
                              static_cast<std::ptrdiff_t>(std::min(indices.size(), at + chunk)));
    Eigen::MatrixXd H_a, H_t;
    std::vector<int> labels;
    gather_batch(ds, part, H_a, H_t, labels);
    Tape tape;
    LatentPack pack = encode(tape, H_a, H_t, model.shared_encoder, model.private_a,
                             model.private_t);
    const Eigen::Index b = pack.batch();
    e.S_a.middleRows(row_at, b) = pack.S_a.value();
    e.S_t.middleRows(row_at, b) = pack.S_t.value();
    e.P_a.middleRows(row_at, b) = pack.P_a.value();
    e.P_t.middleRows(row_at, b) = pack.P_t.value();
    for (int l : labels) e.labels.push_back(l);
    row_at += b;
  }
  return e;
}

double linear_probe_accuracy(const Eigen::MatrixXd& X, const std::vector<int>& y, int classes,
                             std::uint64_t seed) {
  if (static_cast<std::size_t>(X.rows()) != y.size())
    throw ValidationError("probe: row count does not match label count");
  Rng rng(seed);
  Eigen::MatrixXd w0(X.cols(), classes);
  double bound = std::sqrt(1.0 / static_cast<double>(X.cols()));
  rng.fill_uniform(w0, -bound, bound);
  Param W("probe.W", w0);
  Param b("probe.b", Eigen::MatrixXd::Zero(1, classes));
  std::vector<Param*> params{&W, &b};
  AdamW opt(AdamWConfig{0.05, 0.9, 0.999, 1e-8, 0.0}, params);
  for (int it = 0; it < 300; ++it) {
    Tape tape;
    Tensor logits = add_bias(matmul(tape.leaf(X), tape.lift(W)), tape.lift(b));
    Tensor loss = cross_entropy(logits, y);
    tape.backward(loss);
    opt.step(params, {W.leaf.grad(), b.leaf.grad()});
  }
  Eigen::MatrixXd logits = (X * W.value).rowwise() + b.value.row(0);
  std::size_t hits = 0;
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    Eigen::Index arg = 0;
    logits.row(r).maxCoeff(&arg);
    if (static_cast<int>(arg) == y[static_cast<std::size_t>(r)]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(logits.rows());
}

std::string ProbeReport::to_text() const {
  std::ostringstream os;
  os << "modality_acc_shared = " << num(modality_acc_shared) << "\n";
  os << "modality_acc_private = " << num(modality_acc_private) << "\n";
  os << "emotion_acc_shared = " << num(emotion_acc_shared) << "\n";
  os << "mean_centroid_dist = " << num(mean_centroid_dist) << "\n";
  for (Eigen::Index c = 0; c < class_centroid_dist.size(); ++c)
    os << "centroid_dist_class_" << c << " = " << num(class_centroid_dist(c)) << "\n";
  return os.str();
}

ProbeReport probe_disentanglement(FdrlModel& model, const Dataset& ds,
                                  const std::vector<int>& indices, std::uint64_t seed) {
  Embeddings e = compute_embeddings(model, ds, indices);
  const Eigen::Index n = e.S_a.rows();

  Eigen::MatrixXd S(2 * n, model.dims.d), P(2 * n, model.dims.d);
  S << e.S_a, e.S_t;
  P << e.P_a, e.P_t;
  std::vector<int> y_mod = modality_labels(n);
  std::vector<int> y_emo(e.labels);
  y_emo.insert(y_emo.end(), e.labels.begin(), e.labels.end());

  ProbeReport r;
  r.modality_acc_shared = linear_probe_accuracy(S, y_mod, 2, seed);
  r.modality_acc_private = linear_probe_accuracy(P, y_mod, 2, seed + 1);
  r.emotion_acc_shared = linear_probe_accuracy(S, y_emo, model.dims.classes, seed + 2);

  r.class_centroid_dist.resize(model.dims.classes);
  double dist_sum = 0.0;
  int nonempty = 0;
  for (int c = 0; c < model.dims.classes; ++c) {
    Eigen::RowVectorXd mean_a = Eigen::RowVectorXd::Zero(model.dims.d);
    Eigen::RowVectorXd mean_t = Eigen::RowVectorXd::Zero(model.dims.d);
    int count = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (e.labels[static_cast<std::size_t>(i)] != c) continue;
      mean_a += e.S_a.row(i);
      mean_t += e.S_t.row(i);
      ++count;
    }
    if (count == 0) {
      r.class_centroid_dist(c) = 0.0;
      continue;
    }
    mean_a /= count;
    mean_t /= count;
    r.class_centroid_dist(c) = (mean_a - mean_t).norm();
    dist_sum += r.class_centroid_dist(c);
    ++nonempty;
  }
  r.mean_centroid_dist = nonempty > 0 ? dist_sum / nonempty : 0.0;
  return r;
}

CheckpointData model_to_checkpoint(FdrlModel& model, const std::string& config_echo) {
  CheckpointData data;
  data.config_echo = config_echo;
  for (Param* p : model.params()) data.tensors.emplace_back(p->name, p->value);
  return data;
}

FdrlModel model_from_checkpoint(const CheckpointData& data) {
  std::istringstream is(data.config_echo);
  Config cfg;
  std::string line;
  while (std::getline(is, line)) {
    auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    std::string key = line.substr(0, eq);
    std::string value = line.substr(eq + 1);
    auto trim = [](std::string& s) {
      while (!s.empty() && s.front() == ' ') s.erase(s.begin());
      while (!s.empty() && (s.back() == ' ' || s.back() == '\r')) s.pop_back();
    };
    trim(key);
    trim(value);
    if (!key.empty()) cfg.set(key, value);
  }
  ModelDims dims;
  dims.d_in = cfg.get_int("d_in", 0);
  dims.hidden = cfg.get_int("hidden", 0);
  dims.d = cfg.get_int("d", 0);
  dims.classes = cfg.get_int("classes", 0);
  dims.heads = cfg.get_int("heads", 0);
  dims.validate();
  FdrlModel model = FdrlModel::init(dims, 0);
  for (Param* p : model.params()) {
    const Eigen::MatrixXd* m = data.find(p->name);
    if (!m) throw ValidationError("checkpoint: missing tensor " + p->name);
    if (m->rows() != p->value.rows() || m->cols() != p->value.cols())
      throw ValidationError("checkpoint: tensor " + p->name + " has shape " +
                            std::to_string(m->rows()) + "x" + std::to_string(m->cols()) +
                            ", expected " + std::to_string(p->value.rows()) + "x" +
                            std::to_string(p->value.cols()));
    p->value = *m;
  }
  return model;
}

}  // namespace fdrl
