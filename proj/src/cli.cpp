#include "facepipe/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <ostream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"

#include "facepipe/classify.hpp"
#include "facepipe/detail/random.hpp"
#include "facepipe/embeddings_io.hpp"
#include "facepipe/eval.hpp"
#include "facepipe/heads.hpp"
#include "facepipe/pooling.hpp"

namespace facepipe::cli {

namespace {

using ojson = nlohmann::ordered_json;

constexpr std::uint64_t kDefaultSeed = 42;

bool is_zero_row(std::span<const float> row) {
  return std::all_of(row.begin(), row.end(), [](float v) { return v == 0.0f; });
}

void emit(const std::string& text, const std::string& out_path, std::ostream& out) {
  if (out_path.empty()) {
    out << text << '\n';
    return;
  }
  std::ofstream f(out_path, std::ios::trunc);
  if (!f) throw IoError("cannot open '" + out_path + "' for writing");
  f << text << '\n';
  if (!f) throw IoError("write failure on '" + out_path + "'");
}

std::string with_meta(const EvalReport& report, ojson meta) {
  auto j = ojson::parse(report_to_json(report));
  j["meta"] = std::move(meta);
  return j.dump();
}

// ---------------------------------------------------------------------------

struct PoolArgs {
  std::string manifest, mode = "single", out, labels_out;
  bool no_l2 = false;
};

void cmd_pool(const PoolArgs& a, std::ostream& out, std::ostream& err) {
  const std::filesystem::path manifest(a.manifest);
  EmbeddingStore store(manifest.parent_path());
  const auto samples = load_manifest(manifest, store);
  if (samples.empty()) throw EmptyInputError("manifest '" + a.manifest + "' has no samples");

  DescriptorOptions opts;
  opts.mode = a.mode == "group" ? PoolingMode::Group : PoolingMode::SingleFace;
  opts.l2 = !a.no_l2;
  const auto descriptors = descriptors_for_videos(samples, store, opts);

  std::size_t invalid = 0;
  for (std::size_t i = 0; i < descriptors.size(); ++i) {
    if (!descriptors[i].valid) {
      ++invalid;
      err << "pool: no faces in '" << samples[i].id << "', using zero descriptor\n";
    }
  }
  write_embedding_file(to_matrix(descriptors), a.out);
  if (!a.labels_out.empty()) {
    std::vector<std::int64_t> labels;
    labels.reserve(samples.size());
    for (const auto& s : samples) labels.push_back(s.label);
    write_label_file(labels, a.labels_out);
  }
  ojson j;
  j["command"] = "pool";
  j["mode"] = a.mode;
  j["l2"] = opts.l2;
  j["videos"] = samples.size();
  j["valid"] = samples.size() - invalid;
  j["invalid"] = invalid;
  j["dim"] = descriptors.front().values.size();
  out << j.dump() << '\n';
}

struct TrainArgs {
  std::string x, y, out;
  double lambda = TrainConfig{}.lambda;
  std::size_t epochs = TrainConfig{}.epochs;
  std::uint64_t seed = kDefaultSeed;
};

void cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  const auto x = read_embedding_file(a.x);
  const auto y = read_label_file(a.y);
  if (y.size() != x.rows()) {
    throw ShapeError("'" + a.x + "' has " + std::to_string(x.rows()) + " rows but '" + a.y + "' has " +
                     std::to_string(y.size()) + " labels");
  }
  // Zero descriptors (no face in the clip) are left out of training.
  EmbeddingMatrix train_x(x.dim());
  std::vector<std::int64_t> train_y;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    if (is_zero_row(x.row(i))) continue;
    train_x.append_row(x.row(i));
    train_y.push_back(y[i]);
  }
  const std::size_t skipped = x.rows() - train_x.rows();
  if (skipped > 0) err << "train-svm: skipped " << skipped << " zero descriptors\n";

  TrainConfig cfg;
  cfg.lambda = a.lambda;
  cfg.epochs = a.epochs;
  cfg.seed = a.seed;
  const auto model = train_linear_svm(train_x, train_y, cfg);
  write_linear_model(model, a.out);

  std::size_t correct = 0;
  for (std::size_t i = 0; i < train_x.rows(); ++i) {
    if (static_cast<std::int64_t>(svm_predict(model, train_x.row(i)).label) == train_y[i]) ++correct;
  }
  ojson j;
  j["command"] = "train-svm";
  j["seed"] = a.seed;
  j["lambda"] = a.lambda;
  j["epochs"] = a.epochs;
  j["classes"] = model.classes;
  j["dim"] = model.dim;
  j["n_train"] = train_x.rows();
  j["n_skipped"] = skipped;
  j["train_accuracy"] = round2(100.0 * static_cast<double>(correct) / static_cast<double>(train_x.rows()));
  out << j.dump() << '\n';
}

struct EvalArgs {
  std::string model, x, y, out;
  bool subset_valid_only = false;
  bool seven_of_eight = false;
  std::size_t contempt_index = 0;
};

void cmd_eval(const EvalArgs& a, std::ostream& out, std::ostream& err) {
  const auto model = read_linear_model(a.model);
  const auto x = read_embedding_file(a.x);
  const auto y = read_label_file(a.y);
  if (y.size() != x.rows()) {
    throw ShapeError("'" + a.x + "' has " + std::to_string(x.rows()) + " rows but '" + a.y + "' has " +
                     std::to_string(y.size()) + " labels");
  }
  if (a.seven_of_eight && model.classes != 8) {
    throw ShapeError("--classes-7-of-8 needs an 8-class model, got " + std::to_string(model.classes));
  }
  std::vector<std::int64_t> pred, truth;
  std::vector<bool> valid;
  std::size_t dropped = 0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const auto p = svm_predict(model, x.row(i));
    if (a.seven_of_eight) {
      if (y[i] < 0 || y[i] >= 8) throw IndexError("label " + std::to_string(y[i]) + " out of range for 8 classes");
      if (static_cast<std::size_t>(y[i]) == a.contempt_index) {
        ++dropped;
        continue;
      }
      const auto scores7 = reduce_scores_8_to_7(softmax(p.scores), a.contempt_index);
      pred.push_back(static_cast<std::int64_t>(argmax(scores7)));
      truth.push_back(static_cast<std::int64_t>(map_label_8_to_7(static_cast<std::size_t>(y[i]), a.contempt_index)));
    } else {
      pred.push_back(static_cast<std::int64_t>(p.label));
      truth.push_back(y[i]);
    }
    valid.push_back(!is_zero_row(x.row(i)));
  }
  if (dropped > 0) err << "eval: dropped " << dropped << " samples labeled with the contempt class\n";
  const std::size_t classes = a.seven_of_eight ? 7 : model.classes;
  const auto report = a.subset_valid_only ? subset_report(pred, truth, classes, valid)
                                          : accuracy_and_confusion(pred, truth, classes);
  ojson meta;
  meta["command"] = "eval";
  meta["subset"] = a.subset_valid_only ? "valid-only" : "all";
  meta["classes"] = classes;
  meta["n_total"] = pred.size();
  emit(with_meta(report, std::move(meta)), a.out, out);
}

struct AgeArgs {
  std::string probs, ages, truth, out;
  std::size_t top_l = 0;
};

void cmd_age(const AgeArgs& a, std::ostream& out, std::ostream&) {
  const auto probs = read_embedding_file(a.probs);
  const auto ages = read_value_file(a.ages);
  if (ages.size() != probs.dim()) {
    throw ShapeError("'" + a.probs + "' has " + std::to_string(probs.dim()) + " age classes but '" + a.ages +
                     "' lists " + std::to_string(ages.size()) + " ages");
  }
  const std::size_t top_l = a.top_l == 0 ? ages.size() : a.top_l;
  std::vector<double> pred;
  pred.reserve(probs.rows());
  for (std::size_t i = 0; i < probs.rows(); ++i) {
    const auto row = probs.row(i);
    const std::vector<double> p(row.begin(), row.end());
    pred.push_back(expected_age(p, ages, top_l));
  }
  ojson j;
  j["predictions"] = pred;
  if (!a.truth.empty()) {
    const auto truth = read_value_file(a.truth);
    j["mae"] = mean_absolute_error(pred, truth);
  } else {
    j["mae"] = nullptr;
  }
  j["n"] = pred.size();
  j["meta"] = {{"command", "age"}, {"top_l", top_l}};
  emit(j.dump(), a.out, out);
}

struct IdentifyArgs {
  std::string embeddings, subjects, out;
  std::size_t reps = Rank1Options{}.repetitions;
  std::uint64_t seed = kDefaultSeed;
};

void cmd_identify(const IdentifyArgs& a, std::ostream& out, std::ostream&) {
  const auto emb = read_embedding_file(a.embeddings);
  const auto ids = read_label_file(a.subjects);
  const auto groups = group_by_subject(emb, ids);
  Rank1Options opts;
  opts.repetitions = a.reps;
  opts.seed = a.seed;
  const auto report = rank1_identification(groups, opts);
  ojson meta;
  meta["command"] = "identify";
  meta["seed"] = a.seed;
  meta["reps"] = a.reps;
  meta["subjects"] = groups.size();
  meta["std"] = "population";
  emit(with_meta(report, std::move(meta)), a.out, out);
}

struct BenchArgs {
  std::size_t frames = 0, dim = 0, reps = 0;
  std::uint64_t seed = kDefaultSeed;
};

void cmd_bench(const BenchArgs& a, std::ostream& out, std::ostream&) {
  out << bench_to_json(bench_pooling(a.frames, a.dim, a.reps, a.seed)) << '\n';
}

}  // namespace

BenchReport bench_pooling(std::size_t frames, std::size_t dim, std::size_t reps, std::uint64_t seed) {
  if (frames == 0 || dim == 0 || reps == 0) throw ParamError("bench parameters must be positive");
  auto rng = detail::make_rng(seed);
  EmbeddingMatrix m(dim, frames);
  for (auto& v : m.data()) v = static_cast<float>(detail::uniform01(rng) * 2.0 - 1.0);

  std::vector<double> times_ms;
  times_ms.reserve(reps);
  std::size_t sink = 0;
  for (std::size_t r = 0; r < reps; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto d = stat_pool_video(m);
    const auto t1 = std::chrono::steady_clock::now();
    sink += d.values.size();
    times_ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  if (sink != reps * 4 * dim) throw NumericError("unexpected descriptor length in benchmark");

  BenchReport report;
  report.frames = frames;
  report.dim = dim;
  report.reps = reps;
  report.seed = seed;
  const auto ms = mean_std(times_ms);
  report.mean_ms = ms.mean;
  report.std_ms = ms.std;
  for (double t : times_ms) report.total_ms += t;
  auto sorted = times_ms;
  std::sort(sorted.begin(), sorted.end());
  // Nearest-rank percentile.
  const auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(sorted.size())));
  report.p95_ms = sorted[std::max<std::size_t>(rank, 1) - 1];
  report.cores = std::thread::hardware_concurrency();
  return report;
}

std::string bench_to_json(const BenchReport& r) {
  ojson j;
  j["frames"] = r.frames;
  j["dim"] = r.dim;
  j["reps"] = r.reps;
  j["mean_ms"] = r.mean_ms;
  j["std_ms"] = r.std_ms;
  j["p95_ms"] = r.p95_ms;
  j["total_ms"] = r.total_ms;
  j["meta"] = {{"command", "bench"}, {"seed", r.seed}, {"cores", r.cores}};
  return j.dump();
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Video descriptor pooling, linear classification and evaluation", "facepipe"};
  app.require_subcommand(1);

  PoolArgs pool;
  auto* pool_cmd = app.add_subcommand("pool", "Pool per-face embeddings into one descriptor per video");
  pool_cmd->add_option("--manifest", pool.manifest, "JSON-lines manifest")->required();
  pool_cmd->add_option("--mode", pool.mode, "single | group")->check(CLI::IsMember({"single", "group"}));
  pool_cmd->add_option("--out", pool.out, "Output EMB1 file, one row per video")->required();
  pool_cmd->add_flag("--no-l2", pool.no_l2, "Skip L2 normalization");
  pool_cmd->add_option("--labels-out", pool.labels_out, "Also write manifest labels, one per line");

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train-svm", "Train one-vs-rest linear SVMs");
  train_cmd->add_option("--x", train.x, "EMB1 descriptors")->required();
  train_cmd->add_option("--y", train.y, "Labels file")->required();
  train_cmd->add_option("--lambda", train.lambda, "L2 regularization")->check(CLI::PositiveNumber);
  train_cmd->add_option("--epochs", train.epochs, "Training epochs")->check(CLI::PositiveNumber);
  train_cmd->add_option("--seed", train.seed, "Shuffle seed");
  train_cmd->add_option("--out", train.out, "Output LSVM model")->required();

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a linear model on labeled descriptors");
  eval_cmd->add_option("--model", ev.model, "LSVM model")->required();
  eval_cmd->add_option("--x", ev.x, "EMB1 descriptors")->required();
  eval_cmd->add_option("--y", ev.y, "Labels file")->required();
  eval_cmd->add_flag("--subset-valid-only", ev.subset_valid_only, "Only score videos with a non-zero descriptor");
  auto* seven = eval_cmd->add_flag("--classes-7-of-8", ev.seven_of_eight, "Score 8-class models on 7 classes");
  auto* contempt = eval_cmd->add_option("--contempt-index", ev.contempt_index, "Class dropped by --classes-7-of-8")
                       ->check(CLI::Range(0, 7));
  seven->needs(contempt);
  contempt->needs(seven);
  eval_cmd->add_option("--out", ev.out, "Write the report here instead of stdout");

  AgeArgs age;
  auto* age_cmd = app.add_subcommand("age", "Expected-age prediction from age posteriors");
  age_cmd->add_option("--probs", age.probs, "EMB1 file, one posterior per row")->required();
  age_cmd->add_option("--ages", age.ages, "Age value of each class, one per line")->required();
  age_cmd->add_option("--top-l", age.top_l, "Number of most probable ages used (default: all)");
  age_cmd->add_option("--truth", age.truth, "True ages, one per line; adds MAE to the report");
  age_cmd->add_option("--out", age.out, "Write the report here instead of stdout");

  IdentifyArgs ident;
  auto* ident_cmd = app.add_subcommand("identify", "Rank-1 identification with one gallery image per subject");
  ident_cmd->add_option("--embeddings", ident.embeddings, "EMB1 embeddings")->required();
  ident_cmd->add_option("--subjects", ident.subjects, "Subject id per embedding row, one per line")->required();
  ident_cmd->add_option("--reps", ident.reps, "Repetitions")->check(CLI::PositiveNumber);
  ident_cmd->add_option("--seed", ident.seed, "Gallery sampling seed");
  ident_cmd->add_option("--out", ident.out, "Write the report here instead of stdout");

  BenchArgs bench;
  auto* bench_cmd = app.add_subcommand("bench", "Time stat pooling on random data");
  bench_cmd->add_option("--frames", bench.frames, "Frames per descriptor")->required()->check(CLI::PositiveNumber);
  bench_cmd->add_option("--dim", bench.dim, "Embedding dimension")->required()->check(CLI::PositiveNumber);
  bench_cmd->add_option("--reps", bench.reps, "Descriptors to time")->required()->check(CLI::PositiveNumber);
  bench_cmd->add_option("--seed", bench.seed, "Data seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "facepipe: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    if (pool_cmd->parsed()) cmd_pool(pool, out, err);
    else if (train_cmd->parsed()) cmd_train(train, out, err);
    else if (eval_cmd->parsed()) cmd_eval(ev, out, err);
    else if (age_cmd->parsed()) cmd_age(age, out, err);
    else if (ident_cmd->parsed()) cmd_identify(ident, out, err);
    else if (bench_cmd->parsed()) cmd_bench(bench, out, err);
  } catch (const Error& e) {
    err << "facepipe: " << e.what() << '\n';
    return kExitDataError;
  } catch (const std::exception& e) {
    err << "facepipe: " << e.what() << '\n';
    return kExitDataError;
  }
  return kExitOk;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  argv.push_back("facepipe");
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace facepipe::cli
