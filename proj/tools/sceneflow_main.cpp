#include <CLI11.hpp>
#include <cstdio>
#include <iostream>
#include <sstream>

#include "sceneflow/config_io.hpp"
#include "sceneflow/dataset_io.hpp"
#include "sceneflow/synthgen.hpp"
#include "sceneflow/trainer.hpp"

namespace sf = sceneflow;

namespace {

sf::SceneSpec scene_spec_from(const std::string& spec_file, const std::string& preset) {
  if (!spec_file.empty()) return sf::parse_scene_spec(sf::read_config_file(spec_file));
  if (preset == "desk-av") return sf::desk_av_preset();
  throw sf::DataError("unknown preset '" + preset + "' (available: desk-av)");
}

sf::Point3 parse_point(const std::string& text) {
  std::istringstream ss(text);
  sf::Point3 p;
  ss >> p.x >> p.y >> p.z;
  if (!ss) throw sf::DataError("expected \"x y z\", got '" + text + "'");
  return p;
}

struct FitFlags {
  std::string data, out, config_file, log_file;
  int epochs = -1;
  int depth = -1;
  int subsequence = -1;
  bool no_multistep = false;
  bool no_cycle = false;
  std::string time_encoding, activation;
  long long seed = -1;
};

sf::TrainConfig resolve_train_config(const FitFlags& flags) {
  sf::TrainConfig config;
  if (!flags.config_file.empty())
    config = sf::parse_train_config(sf::read_config_file(flags.config_file));
  if (flags.epochs > 0) config.epochs = flags.epochs;
  if (flags.depth > 0) config.mlp.depth = flags.depth;
  if (flags.subsequence > 0) config.subsequence_length = flags.subsequence;
  if (flags.no_multistep) config.loss.enable_multistep = false;
  if (flags.no_cycle) config.loss.enable_cycle = false;
  if (!flags.time_encoding.empty())
    config.time_encoding.mode = sf::parse_time_encoding(flags.time_encoding);
  if (!flags.activation.empty()) config.mlp.activation = sf::parse_activation(flags.activation);
  if (flags.seed >= 0) config.seed = static_cast<std::uint64_t>(flags.seed);
  config.validate();
  return config;
}

void cmd_synth(const std::string& spec_file, const std::string& preset, const std::string& out,
               long long seed) {
  sf::SceneSpec spec = scene_spec_from(spec_file, preset);
  if (seed >= 0) spec.seed = static_cast<std::uint64_t>(seed);
  const sf::PointCloudSequence sequence = sf::generate(spec);
  sf::save_sequence(sequence, out);
  std::size_t points = 0;
  for (const auto& f : sequence.frames) points += f.cloud.size();
  std::cout << "wrote '" << sequence.name << "': " << sequence.frames.size() << " frames, "
            << points << " points -> " << out << "\n";
}

void cmd_fit(const FitFlags& flags) {
  const sf::PointCloudSequence sequence = sf::load_sequence(flags.data);
  const sf::TrainConfig config = resolve_train_config(flags);
  const sf::FitResult result = sf::fit(sequence, config);
  sf::save_checkpoint(result.params, flags.out);
  const std::string log_path = flags.log_file.empty() ? flags.out + ".log" : flags.log_file;
  sf::save_train_log(result.log, log_path);
  std::cout << "fit '" << sequence.name << "': " << result.log.epochs.size() << " epochs, best "
            << result.log.best_loss << " at epoch " << result.log.best_epoch << " ("
            << (result.log.stop_reason == sf::TrainLog::StopReason::EarlyStopped ? "early-stopped"
                                                                                 : "completed")
            << ")\n";
  std::cout << "checkpoint -> " << flags.out << "\nlog -> " << log_path << "\n";
}

sf::PriorFlowSource load_field(const std::string& ckpt, const sf::PointCloudSequence& sequence) {
  sf::MLPParams params = sf::load_checkpoint(ckpt);
  const sf::TimeEncoding encoding = sf::infer_time_encoding(params.config.input_dim);
  return {std::move(params), encoding, sequence};
}

void cmd_flow(const std::string& data, const std::string& ckpt, const std::string& out) {
  const sf::PointCloudSequence sequence = sf::load_sequence(data);
  const sf::PriorFlowSource field = load_field(ckpt, sequence);
  const sf::FlowField flow = sf::extract_flow_field(field, sequence);
  sf::save_flow_field(flow, out);
  std::cout << "wrote " << flow.frames.size() << " flow frames -> " << out << "\n";
}

void cmd_track(const std::string& data, const std::string& ckpt, const std::string& start_text,
               int t0, int t1, const std::string& out) {
  const sf::PointCloudSequence sequence = sf::load_sequence(data);
  const sf::PriorFlowSource field = load_field(ckpt, sequence);
  const sf::FrameTimes times = sf::FrameTimes::from_sequence(sequence);
  const sf::Trajectory track =
      sf::extract_track(field, parse_point(start_text), times, t0, t1);
  sf::save_trajectory(track, out);
  std::cout << "wrote " << track.samples.size() << " track samples -> " << out << "\n";
}

void cmd_eval(const std::string& data, const std::string& flow_dir, const std::string& out) {
  const sf::PointCloudSequence sequence = sf::load_sequence(data);
  const sf::FlowField flow = sf::load_flow_field(flow_dir);
  const auto samples = sf::collect_samples(sequence, flow);
  const sf::MetricReport report = sf::evaluate(samples, sf::BucketSpec{});
  sf::save_metric_report(report, out);
  std::cout << "average EPE " << report.average_epe << " m, threeway mean "
            << report.threeway.mean << " m";
  if (report.mean_dynamic_normalized_epe)
    std::cout << ", mean dynamic normalized EPE " << *report.mean_dynamic_normalized_epe;
  std::cout << "\nreport -> " << out << " (+.kv)\n";
}

void cmd_ablate(const std::string& data, const std::string& config_file, const std::string& out) {
  const sf::PointCloudSequence sequence = sf::load_sequence(data);
  sf::TrainConfig base;
  if (!config_file.empty()) base = sf::parse_train_config(sf::read_config_file(config_file));

  using Variant = sf::AblationVariant;
  using Kind = Variant::Kind;
  std::vector<Variant> grid = {
      {.kind = Kind::Full},
      {.kind = Kind::NoMultistep},
      {.kind = Kind::NoCycle},
      {.kind = Kind::Subsequence, .value = 5},
      {.kind = Kind::Subsequence, .value = 20},
      {.kind = Kind::Depth, .value = 4},
      {.kind = Kind::Depth, .value = 8},
      {.kind = Kind::Depth, .value = 12},
      {.kind = Kind::Depth, .value = 18},
  };

  std::filesystem::create_directories(out);
  std::ostringstream table;
  table << "variant,mean_dynamic_normalized_epe,threeway_mean,average_epe\n";
  for (const auto& variant : grid) {
    if (variant.kind == Kind::Subsequence &&
        static_cast<std::size_t>(variant.value) > sequence.frames.size()) {
      std::cout << "skipping " << variant.name() << " (sequence has only "
                << sequence.frames.size() << " frames)\n";
      continue;
    }
    const sf::AblationOutcome outcome = sf::run_ablation(sequence, base, variant);
    const std::filesystem::path report_path = std::filesystem::path(out) / (variant.name() + ".report");
    sf::save_metric_report(outcome.report, report_path);
    sf::save_train_log(outcome.log, std::filesystem::path(out) / (variant.name() + ".log"));
    const double dyn = outcome.report.mean_dynamic_normalized_epe.value_or(-1.0);
    table << variant.name() << ',' << dyn << ',' << outcome.report.threeway.mean << ','
          << outcome.report.average_epe << '\n';
    std::cout << variant.name() << ": mean dynamic normalized EPE " << dyn << "\n";
  }
  std::ofstream summary(std::filesystem::path(out) / "summary.csv");
  summary << table.str();
  std::cout << "summary -> " << (std::filesystem::path(out) / "summary.csv").string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"scene flow estimation via a space-time neural prior"};
  app.require_subcommand(1);

  // synth
  std::string synth_spec, synth_preset, synth_out;
  long long synth_seed = -1;
  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  synth->add_option("--spec", synth_spec, "scene spec file (key=value)");
  synth->add_option("--preset", synth_preset, "built-in scene (desk-av)");
  synth->add_option("--out", synth_out, "output dataset directory")->required();
  synth->add_option("--seed", synth_seed, "override the scene seed");
  synth->callback([&] {
    if (synth_spec.empty() == synth_preset.empty())
      throw CLI::ValidationError("synth", "give exactly one of --spec / --preset");
    cmd_synth(synth_spec, synth_preset, synth_out, synth_seed);
  });

  // fit
  FitFlags fit_flags;
  auto* fit = app.add_subcommand("fit", "optimize the neural prior on a dataset");
  fit->add_option("--data", fit_flags.data, "dataset directory")->required();
  fit->add_option("--out", fit_flags.out, "output checkpoint path")->required();
  fit->add_option("--config", fit_flags.config_file, "training config file (key=value)");
  fit->add_option("--log", fit_flags.log_file, "train log path (default <out>.log)");
  fit->add_option("--epochs", fit_flags.epochs, "override epoch count");
  fit->add_option("--depth", fit_flags.depth, "hidden layer count");
  fit->add_option("--subsequence", fit_flags.subsequence, "train on the first N frames");
  fit->add_flag("--no-multistep", fit_flags.no_multistep, "drop k>1 loss terms");
  fit->add_flag("--no-cycle", fit_flags.no_cycle, "drop the cycle-consistency term");
  fit->add_option("--time-encoding", fit_flags.time_encoding, "normalized|sinusoidal");
  fit->add_option("--activation", fit_flags.activation, "relu|sinc|gaussian");
  fit->add_option("--seed", fit_flags.seed, "training seed");
  fit->callback([&] { cmd_fit(fit_flags); });

  // flow
  std::string flow_data, flow_ckpt, flow_out;
  auto* flow = app.add_subcommand("flow", "export per-frame flow from a checkpoint");
  flow->add_option("--data", flow_data)->required();
  flow->add_option("--ckpt", flow_ckpt)->required();
  flow->add_option("--out", flow_out, "output flow directory")->required();
  flow->callback([&] { cmd_flow(flow_data, flow_ckpt, flow_out); });

  // track
  std::string track_data, track_ckpt, track_start, track_out;
  int track_t0 = 0, track_t1 = 0;
  auto* track = app.add_subcommand("track", "integrate a long-horizon point track");
  track->add_option("--data", track_data)->required();
  track->add_option("--ckpt", track_ckpt)->required();
  track->add_option("--start", track_start, "\"x y z\" start position")->required();
  track->add_option("--t0", track_t0, "start frame index")->required();
  track->add_option("--t1", track_t1, "end frame index")->required();
  track->add_option("--out", track_out, "trajectory text file")->required();
  track->callback([&] { cmd_track(track_data, track_ckpt, track_start, track_t0, track_t1, track_out); });

  // eval
  std::string eval_data, eval_flow, eval_out;
  auto* eval = app.add_subcommand("eval", "evaluate exported flow against ground truth");
  eval->add_option("--data", eval_data)->required();
  eval->add_option("--flow", eval_flow, "flow directory")->required();
  eval->add_option("--out", eval_out, "report path")->required();
  eval->callback([&] { cmd_eval(eval_data, eval_flow, eval_out); });

  // ablate
  std::string ablate_data, ablate_config, ablate_out;
  auto* ablate = app.add_subcommand("ablate", "run the ablation grid");
  ablate->add_option("--data", ablate_data)->required();
  ablate->add_option("--config", ablate_config, "base training config");
  ablate->add_option("--out", ablate_out, "output directory")->required();
  ablate->callback([&] { cmd_ablate(ablate_data, ablate_config, ablate_out); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const sf::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
