#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "rarhsmm/evaluate.hpp"
#include "rarhsmm/inference.hpp"
#include "rarhsmm/io.hpp"
#include "rarhsmm/learning.hpp"
#include "rarhsmm/preprocess.hpp"
#include "rarhsmm/simulate.hpp"

namespace fs = std::filesystem;

namespace rarhsmm::cli {

namespace {

constexpr const char* kPaperDefault = "paper-default";

struct PreprocessArgs {
  std::string in, out, labels_in, labels_out;
  double rate_in = 0.0, rate_out = 50.0;
  bool zscore = false;
  int scorer = -1;
};

struct SimulateArgs {
  std::string model, out, truth;
  std::size_t n = 0;
  std::uint64_t seed = 0;
};

struct TrainArgs {
  std::string mode = "unsupervised";
  std::string data, labels, init = kPaperDefault, out, log;
  int max_iters = 100;
  double rel_tol = 1e-6;
  double min_sigma = 1e-6;
  int threads = 1;
  int p = 5;
  double duration_seconds = 30.0;
};

struct ScoreArgs {
  std::string model, data, out, posteriors;
};

struct EvalArgs {
  std::string pred, truth, model, report, json;
  std::vector<std::string> data;
  std::string metrics = "mcc,f1,event";
  double rate = 0.0;
};

std::vector<fs::path> sequence_files(const std::string& where) {
  const fs::path p(where);
  if (!fs::exists(p)) throw ParseError("no such file or directory: " + where);
  if (!fs::is_directory(p)) return {p};
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(p))
    if (entry.is_regular_file() && entry.path().extension() == ".seq")
      files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw DataError("no .seq files in " + where);
  return files;
}

std::vector<Sequence> load_sequences(const std::vector<fs::path>& files) {
  std::vector<Sequence> seqs;
  for (const auto& f : files) seqs.push_back(io::read_sequence(f.string()));
  for (const auto& s : seqs)
    if (s.sample_rate != seqs.front().sample_rate)
      throw DataError("sequences in one batch must share a sample rate");
  return seqs;
}

// Labels for one sequence: <stem>.lab (a label track) or <stem>.csv
// (annotations, filtered by scorer when scorer >= 0).
LabelTrack labels_for(const fs::path& seq_file, const std::string& label_dir,
                      const Sequence& seq, int scorer) {
  const fs::path dir(label_dir);
  const fs::path track = dir / (seq_file.stem().string() + ".lab");
  const fs::path annotations = dir / (seq_file.stem().string() + ".csv");
  if (scorer < 0 && fs::exists(track)) {
    LabelTrack t = io::read_labels(track.string());
    if (t.sample_rate != seq.sample_rate)
      throw DataError(track.string() + ": label rate differs from the sequence rate");
    return t;
  }
  if (!fs::exists(annotations))
    throw DataError("no labels for " + seq_file.string() + " in " + label_dir +
                    (scorer >= 0 ? " (expert mode needs a .csv annotation file)" : ""));
  auto events = io::read_annotations(annotations.string());
  if (scorer >= 0)
    std::erase_if(events, [&](const EventAnnotation& e) { return e.scorer_id != scorer; });
  return events_to_labels(events, seq.sample_rate, seq.size()).track;
}

int cmd_preprocess(const PreprocessArgs& a, std::ostream& out, std::ostream& err) {
  io::Signal sig = io::read_signal(a.in);
  double rate_in = a.rate_in;
  if (rate_in <= 0.0) {
    if (!sig.sample_rate)
      throw DataError(a.in + ": no '# rate=' header; pass --rate-in");
    rate_in = *sig.sample_rate;
  }
  Sequence seq{resample(sig.samples, rate_in, a.rate_out), a.rate_out};
  if (a.zscore) seq.samples = zscore(seq.samples);
  io::write_sequence(a.out, seq);
  out << "wrote " << seq.size() << " samples at " << a.rate_out << " Hz to " << a.out << '\n';

  if (!a.labels_in.empty()) {
    if (a.labels_out.empty()) throw DataError("--labels-in requires --labels-out");
    auto events = io::read_annotations(a.labels_in);
    if (a.scorer >= 0)
      std::erase_if(events, [&](const EventAnnotation& e) { return e.scorer_id != a.scorer; });
    const Rasterized r = events_to_labels(events, a.rate_out, seq.size());
    if (r.clipped > 0) err << "warning: " << r.clipped << " event(s) clipped at the recording end\n";
    io::write_labels(a.labels_out, r.track);
  }
  return kOk;
}

int cmd_simulate(const SimulateArgs& a, std::ostream& out) {
  const ModelParams model = load_model(a.model);
  require_valid(model);
  const Simulation sim = sample_sequence(model, a.n, a.seed);
  io::write_sequence(a.out, sim.sequence);
  io::write_truth(a.truth, sim.path, model.sample_rate);
  out << "simulated " << a.n << " samples (seed " << a.seed << ")\n";
  return kOk;
}

int cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  const auto files = sequence_files(a.data);
  const std::vector<Sequence> seqs = load_sequences(files);
  const double rate = seqs.front().sample_rate;

  int scorer = -1;
  std::string mode = a.mode;
  if (mode.starts_with("expert:")) {
    try {
      scorer = std::stoi(mode.substr(7));
    } catch (const std::exception&) {
      throw DataError("bad expert id in --mode " + mode);
    }
    mode = "supervised";
  }

  ModelParams model;
  std::vector<IterationRecord> log;
  bool converged = true;

  if (mode == "supervised") {
    if (a.labels.empty()) throw DataError("supervised training needs --labels");
    std::vector<LabelTrack> labels;
    for (std::size_t i = 0; i < files.size(); ++i)
      labels.push_back(labels_for(files[i], a.labels, seqs[i], scorer));
    SupervisedOptions opts;
    if (a.init == kPaperDefault) {
      opts.K = 2;
      opts.p = a.p;
      opts.D = std::max(1, static_cast<int>(std::lround(a.duration_seconds * rate)));
    } else {
      const ModelParams shape = load_model(a.init);
      opts.K = shape.K;
      opts.p = shape.p;
      opts.D = shape.D;
    }
    opts.mstep.min_sigma = a.min_sigma;
    const SupervisedResult res = supervised_fit(seqs, labels, opts);
    model = res.model;
    IterationRecord rec;
    rec.iteration = res.inner_iterations;
    rec.loglik = loglikelihood(model, seqs);
    rec.flags = res.flags;
    log.push_back(rec);
    for (const auto& f : res.flags) err << "note: " << f << '\n';
  } else if (mode == "unsupervised") {
    ModelParams init;
    if (a.init == kPaperDefault) {
      InitConfig cfg;
      cfg.p = a.p;
      cfg.duration_seconds = a.duration_seconds;
      init = default_unsupervised_init(seqs, cfg);
    } else {
      init = load_model(a.init);
    }
    require_valid(init);
    if (init.sample_rate != rate)
      throw DataError("initial model rate " + std::to_string(init.sample_rate) +
                      " Hz differs from the data rate " + std::to_string(rate) + " Hz");
    EmOptions opts;
    opts.max_iters = a.max_iters;
    opts.rel_tol = a.rel_tol;
    opts.min_sigma = a.min_sigma;
    opts.threads = a.threads;
    FitResult fit = em_fit(seqs, init, opts);
    model = fit.model;
    log = fit.log;
    converged = fit.converged;
  } else {
    throw CLI::ValidationError("--mode", "expected supervised, unsupervised or expert:<id>");
  }

  require_valid(model);
  save_model(model, a.out);
  if (!a.log.empty()) {
    std::ofstream lf(a.log);
    if (!lf) throw DataError("cannot write log file: " + a.log);
    write_fit_log(lf, log);
  }
  out << "wrote model to " << a.out << (converged ? "" : " (not converged)") << '\n';
  return converged ? kOk : kNotConverged;
}

int cmd_score(const ScoreArgs& a, std::ostream& out) {
  const ModelParams model = load_model(a.model);
  require_valid(model);
  const Sequence seq = io::read_sequence(a.data);
  if (seq.sample_rate != model.sample_rate) {
    std::ostringstream msg;
    msg << "sample rate mismatch: model " << model.sample_rate << " Hz, data "
        << seq.sample_rate << " Hz";
    throw DataError(msg.str());
  }
  const ViterbiResult vit = viterbi(model, seq);
  io::write_labels(a.out, labels_from_path(vit.path, seq.sample_rate));
  if (!a.posteriors.empty()) {
    const SuffStats st = e_step(model, seq);
    io::write_posteriors(a.posteriors, st.gamma, seq.sample_rate);
  }
  out << "viterbi log-probability " << vit.log_prob << '\n';
  return kOk;
}

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  std::vector<std::string> wanted;
  {
    std::stringstream ss(a.metrics);
    std::string item;
    while (std::getline(ss, item, ','))
      if (!item.empty()) wanted.push_back(item);
  }
  auto want = [&](const std::string& m) {
    return std::find(wanted.begin(), wanted.end(), m) != wanted.end();
  };
  for (const auto& m : wanted)
    if (m != "mcc" && m != "f1" && m != "event" && m != "nll")
      throw CLI::ValidationError("--metrics", "unknown metric " + m);

  MetricsReport report;
  const bool need_labels = want("mcc") || want("f1") || want("event");
  if (need_labels) {
    if (a.pred.empty() || a.truth.empty())
      throw CLI::ValidationError("--pred/--truth", "required for mcc, f1 and event metrics");
    const LabelTrack pred = io::read_labels(a.pred);
    const LabelTrack truth = io::read_labels(a.truth);
    if (pred.size() != truth.size())
      throw DataError("inconsistent lengths: " + a.pred + " has " + std::to_string(pred.size()) +
                      " labels, " + a.truth + " has " + std::to_string(truth.size()));
    if (pred.sample_rate != truth.sample_rate)
      throw DataError("prediction and truth sample rates differ");
    const double rate = a.rate > 0.0 ? a.rate : truth.sample_rate;
    if (rate != truth.sample_rate) throw DataError("--rate disagrees with the label files");
    report.n_samples = truth.size();
    report.sample_rate = rate;
    if (want("mcc")) report.mcc = mcc(pred, truth);
    if (want("f1")) report.f1 = f1(pred, truth);
    if (want("event")) report.events = event_metrics(pred, truth, rate);
  }
  if (want("nll")) {
    if (a.model.empty() || a.data.empty())
      throw CLI::ValidationError("--model/--data", "required for nll");
    const ModelParams model = load_model(a.model);
    std::vector<Sequence> seqs;
    for (const auto& d : a.data) {
      auto batch = load_sequences(sequence_files(d));
      seqs.insert(seqs.end(), batch.begin(), batch.end());
    }
    for (const auto& s : seqs)
      if (s.sample_rate != model.sample_rate) throw DataError("model/data sample rate mismatch");
    report.nll = predictive_nll(model, seqs);
    if (!need_labels) report.sample_rate = model.sample_rate;
  }

  std::ostringstream text;
  write_report(text, report);
  if (a.report.empty()) {
    out << text.str();
  } else {
    std::ofstream rf(a.report);
    if (!rf) throw DataError("cannot write report: " + a.report);
    rf << text.str();
  }
  if (!a.json.empty()) {
    std::ofstream jf(a.json);
    if (!jf) throw DataError("cannot write report: " + a.json);
    jf << report_json(report);
  }
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Robust autoregressive hidden semi-Markov segmentation"};
  app.require_subcommand(1);

  PreprocessArgs pre;
  auto* c_pre = app.add_subcommand("preprocess", "resample, z-score and rasterize annotations");
  c_pre->add_option("--in", pre.in, "raw signal file")->required();
  c_pre->add_option("--rate-in", pre.rate_in, "input rate in Hz (default: file header)");
  c_pre->add_option("--rate-out", pre.rate_out, "output rate in Hz")->capture_default_str();
  c_pre->add_flag("--zscore", pre.zscore, "z-score the resampled series");
  c_pre->add_option("--out", pre.out, "processed sequence file")->required();
  c_pre->add_option("--labels-in", pre.labels_in, "annotation file (onset,duration[,scorer])");
  c_pre->add_option("--labels-out", pre.labels_out, "label track file");
  c_pre->add_option("--scorer", pre.scorer, "keep only annotations from this scorer");

  SimulateArgs sim;
  auto* c_sim = app.add_subcommand("simulate", "sample a sequence from a model");
  c_sim->add_option("--model", sim.model, "model file")->required();
  c_sim->add_option("--n", sim.n, "number of samples")->required();
  c_sim->add_option("--seed", sim.seed, "random seed")->capture_default_str();
  c_sim->add_option("--out", sim.out, "sequence file")->required();
  c_sim->add_option("--truth", sim.truth, "truth file (z,d per sample)")->required();

  TrainArgs tr;
  auto* c_train = app.add_subcommand("train", "fit model parameters");
  c_train->add_option("--mode", tr.mode, "supervised | unsupervised | expert:<id>")->capture_default_str();
  c_train->add_option("--data", tr.data, "sequence file or directory of .seq files")->required();
  c_train->add_option("--labels", tr.labels, "directory of <stem>.lab or <stem>.csv files");
  c_train->add_option("--init", tr.init, "model file or paper-default")->capture_default_str();
  c_train->add_option("--max-iters", tr.max_iters, "EM iteration cap")->capture_default_str();
  c_train->add_option("--rel-tol", tr.rel_tol, "EM relative tolerance")->capture_default_str();
  c_train->add_option("--min-sigma", tr.min_sigma, "floor for sigma")->capture_default_str();
  c_train->add_option("--threads", tr.threads, "E-step worker count")->capture_default_str();
  c_train->add_option("--p", tr.p, "AR order for paper-default")->capture_default_str();
  c_train->add_option("--duration-seconds", tr.duration_seconds,
                      "maximum duration for paper-default, in seconds")->capture_default_str();
  c_train->add_option("--out", tr.out, "output model file")->required();
  c_train->add_option("--log", tr.log, "iteration log (CSV)");

  ScoreArgs sc;
  auto* c_score = app.add_subcommand("score", "Viterbi labels for a sequence");
  c_score->add_option("--model", sc.model, "model file")->required();
  c_score->add_option("--data", sc.data, "sequence file")->required();
  c_score->add_option("--out", sc.out, "label track file")->required();
  c_score->add_option("--posteriors", sc.posteriors, "per-sample regime posteriors (CSV)");

  EvalArgs ev;
  auto* c_eval = app.add_subcommand("eval", "score predicted labels against truth");
  c_eval->add_option("--pred", ev.pred, "predicted label track");
  c_eval->add_option("--truth", ev.truth, "truth label track");
  c_eval->add_option("--rate", ev.rate, "sample rate in Hz (default: file header)");
  c_eval->add_option("--metrics", ev.metrics, "comma list of mcc,f1,event,nll")->capture_default_str();
  c_eval->add_option("--model", ev.model, "model file (nll)");
  c_eval->add_option("--data", ev.data, "sequence files or directories (nll)");
  c_eval->add_option("--report", ev.report, "key=value report file (default: stdout)");
  c_eval->add_option("--json", ev.json, "JSON report file");

  std::vector<std::string> argv_rev(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
  try {
    app.parse(argv_rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n';
    return kUsage;
  }

  try {
    if (c_pre->parsed()) return cmd_preprocess(pre, out, err);
    if (c_sim->parsed()) return cmd_simulate(sim, out);
    if (c_train->parsed()) return cmd_train(tr, out, err);
    if (c_score->parsed()) return cmd_score(sc, out);
    if (c_eval->parsed()) return cmd_eval(ev, out);
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kDataError;
  }
  return kUsage;
}

}  // namespace rarhsmm::cli
