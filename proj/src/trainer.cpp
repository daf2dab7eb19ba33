#include "sceneflow/trainer.hpp"

#include <cstdio>
#include <fstream>
#include <limits>

#include "sceneflow/rng.hpp"

namespace sceneflow {

void TrainConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("TrainConfig: epochs must be >= 1");
  if (minibatch_frames < 2) throw std::invalid_argument("TrainConfig: minibatch_frames must be >= 2");
  if (early_stop_patience < 1) throw std::invalid_argument("TrainConfig: patience must be >= 1");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("TrainConfig: learning_rate must be > 0");
  if (early_stop_min_delta < 0.0)
    throw std::invalid_argument("TrainConfig: early_stop_min_delta must be >= 0");
  if (subsequence_length && *subsequence_length < 2)
    throw std::invalid_argument("TrainConfig: subsequence_length must be >= 2");
  if (window_stride < 0) throw std::invalid_argument("TrainConfig: window_stride must be >= 0");
  loss.validate();
  mlp.validate();
}

std::string activation_name(Activation a) {
  switch (a) {
    case Activation::ReLU: return "relu";
    case Activation::SinC: return "sinc";
    case Activation::Gaussian: return "gaussian";
  }
  return "?";
}

Activation parse_activation(const std::string& name) {
  if (name == "relu") return Activation::ReLU;
  if (name == "sinc") return Activation::SinC;
  if (name == "gaussian") return Activation::Gaussian;
  throw DataError("unknown activation '" + name + "' (relu|sinc|gaussian)");
}

std::string time_encoding_name(TimeEncoding::Mode m) {
  return m == TimeEncoding::Mode::Normalized ? "normalized" : "sinusoidal";
}

TimeEncoding::Mode parse_time_encoding(const std::string& name) {
  if (name == "normalized") return TimeEncoding::Mode::Normalized;
  if (name == "sinusoidal") return TimeEncoding::Mode::Sinusoidal;
  throw DataError("unknown time encoding '" + name + "' (normalized|sinusoidal)");
}

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<std::pair<std::string, std::string>> config_echo(const TrainConfig& c) {
  std::vector<std::pair<std::string, std::string>> e;
  e.emplace_back("epochs", std::to_string(c.epochs));
  e.emplace_back("learning_rate", fmt(c.learning_rate));
  e.emplace_back("minibatch_frames", std::to_string(c.minibatch_frames));
  e.emplace_back("early_stop_patience", std::to_string(c.early_stop_patience));
  e.emplace_back("early_stop_min_delta", fmt(c.early_stop_min_delta));
  e.emplace_back("seed", std::to_string(c.seed));
  if (c.subsequence_length) e.emplace_back("subsequence_length", std::to_string(*c.subsequence_length));
  e.emplace_back("window_stride", std::to_string(c.window_stride));
  e.emplace_back("loss.max_k", std::to_string(c.loss.max_k));
  e.emplace_back("loss.cycle_weight", fmt(c.loss.cycle_weight));
  e.emplace_back("loss.enable_multistep", c.loss.enable_multistep ? "true" : "false");
  e.emplace_back("loss.enable_cycle", c.loss.enable_cycle ? "true" : "false");
  e.emplace_back("loss.chamfer.truncation_radius", fmt(c.loss.chamfer.truncation_radius));
  e.emplace_back("loss.chamfer.symmetric", c.loss.chamfer.symmetric ? "true" : "false");
  e.emplace_back("mlp.hidden_width", std::to_string(c.mlp.hidden_width));
  e.emplace_back("mlp.depth", std::to_string(c.mlp.depth));
  e.emplace_back("mlp.activation", activation_name(c.mlp.activation));
  e.emplace_back("mlp.gaussian_sigma", fmt(c.mlp.gaussian_sigma));
  e.emplace_back("time_encoding", time_encoding_name(c.time_encoding.mode));
  e.emplace_back("time_encoding.frequencies", std::to_string(c.time_encoding.num_frequencies));
  return e;
}

struct EarlyStopper {
  double best = std::numeric_limits<double>::infinity();
  double min_delta;
  int patience;
  int counter = 0;

  explicit EarlyStopper(const TrainConfig& c)
      : min_delta(c.early_stop_min_delta), patience(c.early_stop_patience) {}

  /// Returns true when training should stop. improved_best reports whether
  /// this epoch set a new running minimum (any strict improvement).
  bool update(double loss, bool& improved_best) {
    if (loss < best * (1.0 - min_delta)) counter = 0;
    else ++counter;
    improved_best = loss < best;
    if (improved_best) best = loss;
    return counter >= patience;
  }
};

}  // namespace

std::vector<int> window_starts(int frame_count, int window, int stride) {
  std::vector<int> starts;
  if (frame_count <= window) {
    starts.push_back(0);
    return starts;
  }
  for (int s = 0; s + window <= frame_count; s += stride) starts.push_back(s);
  if (starts.back() + window < frame_count) starts.push_back(frame_count - window);
  return starts;
}

PointCloudSequence truncate_sequence(const PointCloudSequence& sequence, int n) {
  if (n < 2 || static_cast<std::size_t>(n) > sequence.frames.size())
    throw DataError("truncate_sequence: need 2 <= n <= frame count");
  PointCloudSequence out;
  out.name = sequence.name;
  out.frames.assign(sequence.frames.begin(), sequence.frames.begin() + n);
  return out;
}

FitResult fit(const PointCloudSequence& sequence, const TrainConfig& config) {
  config.validate();
  sequence.validate();

  const PointCloudSequence* seq = &sequence;
  PointCloudSequence truncated;
  if (config.subsequence_length &&
      static_cast<std::size_t>(*config.subsequence_length) < sequence.frames.size()) {
    truncated = truncate_sequence(sequence, *config.subsequence_length);
    seq = &truncated;
  }

  const SequenceContext ctx = SequenceContext::build(*seq);
  const int frame_count = ctx.frame_count();
  const int window = std::min(config.minibatch_frames, frame_count);
  const int stride = config.window_stride > 0 ? config.window_stride : window;

  MLPConfig mlp_config = config.mlp;
  mlp_config.input_dim = config.time_encoding.input_dims();
  mlp_config.seed = config.seed;
  MLPParams params = init_params(mlp_config);
  MLPGrads grads = MLPGrads::zeros_like(params);
  AdamState adam = AdamState::create(params, config.learning_rate);
  Rng shuffle_rng = Rng(config.seed).fork(1);

  FitResult result;
  result.log.config_echo = config_echo(config);
  MLPParams best_params = params;
  EarlyStopper stopper(config);
  ad::Tape tape;

  std::vector<int> starts = window_starts(frame_count, window, stride);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    shuffle_rng.shuffle(starts);
    EpochStats stats;
    for (int start : starts) {
      grads.set_zero();
      for (int t = start; t < start + window; ++t) {
        tape.reset();
        const ParamNodes pnodes = watch_params(tape, params);
        const TapeLoss loss = eulerflow_loss(tape, pnodes, mlp_config, config.time_encoding, ctx,
                                             t, config.loss);
        tape.backward(loss.total);
        accumulate_grads(tape, pnodes, grads);

        stats.total += loss.breakdown.total;
        for (const auto& term : loss.breakdown.terms) {
          if (term.kind == LossTerm::Kind::Cycle) stats.cycle += term.value;
          else if (term.direction == Direction::Fwd) stats.chamfer_fwd += term.value;
          else stats.chamfer_bwd += term.value;
        }
      }
      adam_step(params, grads, adam);
    }
    result.log.epochs.push_back(stats);

    bool improved = false;
    const bool stop = stopper.update(stats.total, improved);
    if (improved) {
      result.log.best_epoch = epoch;
      result.log.best_loss = stats.total;
      best_params = params;
    }
    if (stop) {
      result.log.stop_reason = TrainLog::StopReason::EarlyStopped;
      break;
    }
  }

  result.params = std::move(best_params);
  return result;
}

NsfpResult fit_nsfp(const PointCloud& pt, const PointCloud& pnext, const TrainConfig& config) {
  config.validate();
  if (pt.empty() || pnext.empty()) throw DataError("fit_nsfp: empty cloud");

  MLPConfig net_config = config.mlp;
  net_config.input_dim = 3;
  Rng seeder(config.seed);
  MLPConfig fwd_config = net_config, bwd_config = net_config;
  fwd_config.seed = seeder.next();
  bwd_config.seed = seeder.next();

  MLPParams fwd = init_params(fwd_config);
  MLPParams bwd = init_params(bwd_config);
  MLPGrads fwd_grads = MLPGrads::zeros_like(fwd);
  MLPGrads bwd_grads = MLPGrads::zeros_like(bwd);
  AdamState fwd_adam = AdamState::create(fwd, config.learning_rate);
  AdamState bwd_adam = AdamState::create(bwd, config.learning_rate);

  const RowMat pt_mat = pt.as_matrix();
  const RowMat pnext_mat = pnext.as_matrix();
  const NeighborIndex next_index(pnext);

  NsfpResult result;
  result.log.config_echo = config_echo(config);
  result.zero_flow_chamfer = truncated_chamfer(pt, pnext, config.loss.chamfer);

  MLPParams best_fwd = fwd, best_bwd = bwd;
  EarlyStopper stopper(config);
  ad::Tape tape;

  for (int step = 0; step < config.epochs; ++step) {
    tape.reset();
    const ParamNodes fwd_nodes = watch_params(tape, fwd);
    const ParamNodes bwd_nodes = watch_params(tape, bwd);
    const NsfpLoss loss = nsfp_loss(tape, fwd_nodes, bwd_nodes, net_config, pt_mat, pnext_mat,
                                    next_index, config.loss.chamfer);
    tape.backward(loss.total_node);
    fwd_grads.set_zero();
    bwd_grads.set_zero();
    accumulate_grads(tape, fwd_nodes, fwd_grads);
    accumulate_grads(tape, bwd_nodes, bwd_grads);
    adam_step(fwd, fwd_grads, fwd_adam);
    adam_step(bwd, bwd_grads, bwd_adam);

    result.log.epochs.push_back({loss.total, loss.chamfer, 0.0, loss.cycle});
    bool improved = false;
    const bool stop = stopper.update(loss.total, improved);
    if (improved) {
      result.log.best_epoch = step;
      result.log.best_loss = loss.total;
      best_fwd = fwd;
      best_bwd = bwd;
    }
    if (stop) {
      result.log.stop_reason = TrainLog::StopReason::EarlyStopped;
      break;
    }
  }

  const RowMat flow = forward_batch(best_fwd, pt_mat);
  result.flow.resize(pt.size());
  for (Eigen::Index i = 0; i < flow.rows(); ++i)
    result.flow[static_cast<std::size_t>(i)] = {flow(i, 0), flow(i, 1), flow(i, 2)};
  result.final_chamfer =
      truncated_chamfer(PointCloud::from_matrix(pt_mat + flow), pnext, config.loss.chamfer);
  result.fwd_params = std::move(best_fwd);
  result.bwd_params = std::move(best_bwd);
  return result;
}

std::string AblationVariant::name() const {
  switch (kind) {
    case Kind::Full: return "full";
    case Kind::NoMultistep: return "no_multistep";
    case Kind::NoCycle: return "no_cycle";
    case Kind::Subsequence: return "subsequence_" + std::to_string(value);
    case Kind::Depth: return "depth_" + std::to_string(value);
    case Kind::TimeEnc: return "time_" + time_encoding_name(encoding);
    case Kind::Act: return "activation_" + activation_name(activation);
  }
  return "?";
}

TrainConfig AblationVariant::apply(TrainConfig base) const {
  switch (kind) {
    case Kind::Full: break;
    case Kind::NoMultistep: base.loss.enable_multistep = false; break;
    case Kind::NoCycle: base.loss.enable_cycle = false; break;
    case Kind::Subsequence: base.subsequence_length = value; break;
    case Kind::Depth: base.mlp.depth = value; break;
    case Kind::TimeEnc: base.time_encoding.mode = encoding; break;
    case Kind::Act: base.mlp.activation = activation; break;
  }
  return base;
}

AblationOutcome run_ablation(const PointCloudSequence& sequence, const TrainConfig& base,
                             const AblationVariant& variant) {
  const TrainConfig config = variant.apply(base);
  FitResult fitted = fit(sequence, config);

  const PointCloudSequence* seq = &sequence;
  PointCloudSequence truncated;
  if (config.subsequence_length &&
      static_cast<std::size_t>(*config.subsequence_length) < sequence.frames.size()) {
    truncated = truncate_sequence(sequence, *config.subsequence_length);
    seq = &truncated;
  }

  const PriorFlowSource field(std::move(fitted.params), config.time_encoding, *seq);
  const FlowField flow = extract_flow_field(field, *seq);
  AblationOutcome outcome;
  outcome.report = evaluate(collect_samples(*seq, flow), BucketSpec{});
  outcome.log = std::move(fitted.log);
  return outcome;
}

void save_train_log(const TrainLog& log, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("cannot write '" + path.string() + "'");
  os << "# sceneflow train log\n";
  for (const auto& [key, value] : log.config_echo) os << "# " << key << '=' << value << '\n';
  os << "epoch,total_loss\n";
  for (std::size_t e = 0; e < log.epochs.size(); ++e)
    os << e << ',' << fmt(log.epochs[e].total) << '\n';
  os << "# stop_reason="
     << (log.stop_reason == TrainLog::StopReason::EarlyStopped ? "early-stopped" : "completed")
     << '\n';
  os << "# best_epoch=" << log.best_epoch << '\n';
  os << "# best_loss=" << fmt(log.best_loss) << '\n';
  if (!os) throw DataError("failed writing '" + path.string() + "'");
}

}  // namespace sceneflow
