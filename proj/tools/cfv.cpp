// cfv: command-line driver for the feature-coding pipeline.

#include "run_config.hpp"

#include "cfv/classify.hpp"
#include "cfv/dataio.hpp"
#include "cfv/dict_learn.hpp"
#include "cfv/experiments.hpp"
#include "cfv/fisher.hpp"
#include "cfv/gmm.hpp"
#include "cfv/model_io.hpp"
#include "cfv/supcode.hpp"
#include "cfv/synth.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;
using namespace cfv;
using cli::RunConfig;
using cli::UsageError;

namespace {

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  int threads = 0;
  std::string out;
  std::vector<std::string> overrides;
};

struct Context {
  RunConfig cfg;
  std::uint64_t seed = 0;
  fs::path out;
};

Context make_context(const Globals& g) {
  Context c;
  if (!g.config.empty()) c.cfg = RunConfig::from_file(g.config);
  for (const auto& kv : g.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + kv + "'");
    c.cfg.set(kv.substr(0, eq), kv.substr(eq + 1), "--set: ");
  }
  c.seed = g.seed ? *g.seed : c.cfg.get_u64("seed", 0);
  set_num_threads(g.threads > 0 ? g.threads : int(c.cfg.get_int("threads", 0)));
  if (g.out.empty()) throw UsageError("--out is required");
  c.out = g.out;
  return c;
}

void require_file(const std::string& path, const char* what) {
  if (path.empty()) throw UsageError(std::string("missing ") + what);
  if (!fs::is_regular_file(path)) throw UsageError(std::string(what) + " '" + path + "' does not exist");
}

std::string fmt(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw UsageError("cannot write '" + path.string() + "'");
  out << text;
}

void ensure_parent(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
}

std::vector<FeatureSet> load_images(const std::string& manifest, const std::string& split,
                                    const std::string& pca_path) {
  require_file(manifest, "manifest");
  auto images = load_split(manifest, split);
  if (!pca_path.empty()) {
    require_file(pca_path, "PCA model");
    const PcaTransform t = load_pca(pca_path);
    for (auto& im : images) im = apply_pca(t, im);
  }
  return images;
}

// Stacked feature rows, optionally a seeded subset of `limit` rows kept in
// their original order.
Matrix training_rows(const std::vector<FeatureSet>& images, long long limit, std::uint64_t seed) {
  Matrix all = stack_features(images);
  if (limit <= 0 || limit >= all.rows()) return all;
  std::vector<Index> idx(static_cast<std::size_t>(all.rows()));
  std::iota(idx.begin(), idx.end(), Index{0});
  Rng rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(static_cast<std::size_t>(limit));
  std::sort(idx.begin(), idx.end());
  Matrix out(limit, all.cols());
  for (Index i = 0; i < limit; ++i) out.row(i) = all.row(idx[std::size_t(i)]);
  return out;
}

// -- Commands -----------------------------------------------------------------

void cmd_synth(const Context& c) {
  const RunConfig& r = c.cfg;
  const std::string model = r.get_text("synth.model", "I");
  const FeatureFormat format = r.get_text("synth.format", "binary") == "csv" ? FeatureFormat::csv : FeatureFormat::binary;
  synth::ImageDataset data;
  if (model == "I") {
    synth::DatasetIConfig d;
    d.classes = int(r.get_int("synth.classes", d.classes));
    d.dim = r.get_int("synth.dim", d.dim);
    d.bases_per_class = r.get_int("synth.bases_per_class", d.bases_per_class);
    d.shared_bases = r.get_int("synth.shared_bases", d.shared_bases);
    d.active = r.get_int("synth.active", d.active);
    d.laplace_scale = r.get_real("synth.laplace_scale", d.laplace_scale);
    d.noise_std = r.get_real("synth.noise_std", d.noise_std);
    d.features_per_image = r.get_int("synth.features_per_image", d.features_per_image);
    d.train_per_class = int(r.get_int("synth.train_per_class", d.train_per_class));
    d.test_per_class = int(r.get_int("synth.test_per_class", d.test_per_class));
    data = synth::make_dataset_I(d, c.seed);
  } else {
    synth::DatasetIIConfig d;
    d.classes = int(r.get_int("synth.classes", d.classes));
    d.dim = r.get_int("synth.dim", d.dim);
    d.m1 = r.get_int("synth.m1", d.m1);
    d.m2 = r.get_int("synth.m2", d.m2);
    d.prior_active = r.get_int("synth.prior_active", d.prior_active);
    d.prior_scale = r.get_real("synth.prior_scale", d.prior_scale);
    d.class_feature_fraction = r.get_real("synth.class_feature_fraction", d.class_feature_fraction);
    d.basis_perturbation = r.get_real("synth.basis_perturbation", d.basis_perturbation);
    d.lambda1 = r.get_real("synth.lambda1", d.lambda1);
    d.lambda2 = r.get_real("synth.lambda2", d.lambda2);
    d.lambda3 = r.get_real("synth.lambda3", d.lambda3);
    d.residual_active = r.get_int("synth.residual_active", d.residual_active);
    d.noise_std = r.get_real("synth.noise_std", d.noise_std);
    d.metropolis_sweeps = int(r.get_int("synth.metropolis_sweeps", d.metropolis_sweeps));
    d.features_per_image = r.get_int("synth.features_per_image", d.features_per_image);
    d.train_per_class = int(r.get_int("synth.train_per_class", d.train_per_class));
    d.test_per_class = int(r.get_int("synth.test_per_class", d.test_per_class));
    data = synth::make_dataset_II(d, c.seed);
  }

  fs::create_directories(c.out / "images");
  const char* ext = format == FeatureFormat::csv ? ".csv" : ".fvc";
  std::vector<ManifestEntry> entries;
  for (const auto* part : {&data.train, &data.test}) {
    const std::string split = part == &data.train ? "train" : "test";
    for (const auto& im : *part) {
      const std::string rel = "images/" + im.image_id + ext;
      write_feature_set(c.out / rel, im, format);
      entries.push_back({im.image_id, rel, *im.label, split});
    }
  }
  write_manifest(c.out / "manifest.csv", entries);
  std::cout << "wrote " << entries.size() << " images to " << c.out.string() << "\n";
}

struct DataArgs {
  std::string manifest;
  std::string split = "train";
  std::string pca;
};

void cmd_train_pca(const Context& c, const DataArgs& a) {
  const auto images = load_images(a.manifest, a.split, "");
  const Matrix rows = training_rows(images, c.cfg.get_int("pca.train_features", 10000), c.seed);
  const Index dim = c.cfg.get_int("pca.dim", std::min<Index>(64, rows.cols()));
  ensure_parent(c.out);
  save_model(c.out, fit_pca(rows, dim, c.cfg.get_bool("pca.whiten", false)));
}

void cmd_train_dict(const Context& c, const DataArgs& a) {
  const auto images = load_images(a.manifest, a.split, a.pca);
  const Matrix rows = training_rows(images, c.cfg.get_int("dict.train_features", 10000), c.seed);
  dict::DictLearnConfig d;
  d.k = int(c.cfg.get_int("dict.k", d.k));
  d.iters = int(c.cfg.get_int("dict.iters", d.iters));
  d.ridge = c.cfg.get_real("dict.ridge", d.ridge);
  d.seed = derive_seed(c.seed, 1);
  const auto res = dict::learn_dictionary(rows, c.cfg.get_int("dict.m", 64), d);
  ensure_parent(c.out);
  save_model(c.out, res.dictionary);
  std::cout << "reconstruction error " << fmt(res.coded_error.front()) << " -> " << fmt(res.coded_error.back())
            << "\n";
}

void cmd_train_gmm(const Context& c, const DataArgs& a) {
  const auto images = load_images(a.manifest, a.split, a.pca);
  const Matrix rows = training_rows(images, c.cfg.get_int("gmm.train_features", 10000), c.seed);
  gmm::GmmConfig g;
  g.max_iters = int(c.cfg.get_int("gmm.iters", g.max_iters));
  g.tol = c.cfg.get_real("gmm.tol", g.tol);
  g.var_floor = c.cfg.get_real("gmm.var_floor", g.var_floor);
  g.seed = derive_seed(c.seed, 1);
  const auto fit = gmm::fit_gmm(rows, c.cfg.get_int("gmm.k", 64), g);
  ensure_parent(c.out);
  save_model(c.out, fit.model);
  std::cout << "log-likelihood " << fmt(fit.log_likelihood.back()) << " after " << fit.iterations << " iterations\n";
}

void cmd_train_supcoder(const Context& c, const DataArgs& a) {
  const auto images = load_images(a.manifest, a.split, a.pca);
  supcode::SupTrainConfig s;
  s.lr = c.cfg.get_real("sup.lr", s.lr);
  s.epochs = int(c.cfg.get_int("sup.epochs", s.epochs));
  s.batch = int(c.cfg.get_int("sup.batch", s.batch));
  s.l2 = c.cfg.get_real("sup.l2", s.l2);
  s.power_eps = c.cfg.get_real("sup.power_eps", s.power_eps);
  s.seed = derive_seed(c.seed, 1);
  const auto res = supcode::train_sup_encoder(images, c.cfg.get_int("sup.m1", 32), s);
  ensure_parent(c.out);
  save_model(c.out, res.encoder);
  std::cout << "training accuracy " << fmt(res.train_accuracy) << "\n";
}

void cmd_train_hybrid(const Context& c, const DataArgs& a, const std::string& coder_path) {
  require_file(coder_path, "supervised coder");
  const auto coder = load_supervised_encoder(coder_path);
  const auto images = load_images(a.manifest, a.split, a.pca);
  const Matrix rows = training_rows(images, c.cfg.get_int("hybrid.train_features", 10000), c.seed);
  dict::HybridLearnConfig h;
  h.k1 = int(c.cfg.get_int("hybrid.k1", std::min<Index>(h.k1, coder.output_dim())));
  h.k2 = int(c.cfg.get_int("hybrid.k2", h.k2));
  h.lambda = c.cfg.get_real("hybrid.lambda", h.lambda);
  h.iters = int(c.cfg.get_int("hybrid.iters", h.iters));
  h.ridge = c.cfg.get_real("hybrid.ridge", h.ridge);
  h.seed = derive_seed(c.seed, 1);
  if (h.k1 > coder.output_dim()) throw UsageError("hybrid.k1 exceeds the supervised coder's output size");
  const Matrix guidance = supcode::guidance_codes(coder, rows, h.k1);
  const auto res = dict::learn_hybrid_dictionaries(rows, guidance, coder.output_dim(),
                                                   c.cfg.get_int("hybrid.m2", 64), h);
  ensure_parent(c.out);
  save_model(c.out, res.bases_d, res.bases_r);
  std::cout << "hybrid objective " << fmt(res.coded_objective.front()) << " -> " << fmt(res.coded_objective.back())
            << "\n";
}

fisher::Encoder load_encoder(const Context& c, const std::string& model_path, const std::string& coder_path) {
  require_file(model_path, "model");
  sparse::MpConfig mp;
  mp.k = int(c.cfg.get_int("encode.k", mp.k));
  mp.k1 = int(c.cfg.get_int("encode.k1", mp.k1));
  mp.k2 = int(c.cfg.get_int("encode.k2", mp.k2));
  mp.lambda = c.cfg.get_real("encode.lambda", mp.lambda);
  mp.sigma2 = c.cfg.get_real("encode.sigma2", mp.sigma2);
  switch (peek_model_type(model_path)) {
    case ModelType::dictionary: {
      Dictionary d = load_dictionary(model_path);
      mp.k = int(std::min<Index>(mp.k, d.size()));
      return fisher::ScfvcEncoder{std::move(d), mp};
    }
    case ModelType::dictionary_pair: {
      require_file(coder_path, "supervised coder (--coder)");
      auto [bd, br] = load_dictionary_pair(model_path);
      mp.k1 = int(std::min<Index>(mp.k1, bd.size()));
      mp.k2 = int(std::min<Index>(mp.k2, br.size()));
      return fisher::HscfvcEncoder{std::move(bd), std::move(br), load_supervised_encoder(coder_path), mp};
    }
    case ModelType::gmm:
      return fisher::GmmFvcEncoder{load_gmm(model_path), c.cfg.get_bool("encode.variance_gradients", false)};
    default:
      throw UsageError("model '" + model_path + "' is not a dictionary, dictionary pair or GMM");
  }
}

void cmd_encode(const Context& c, const DataArgs& a, const std::string& input, const std::string& model,
                const std::string& coder) {
  const fisher::Encoder enc = load_encoder(c, model, coder);
  std::optional<PcaTransform> pca;
  if (!a.pca.empty()) {
    require_file(a.pca, "PCA model");
    pca = load_pca(a.pca);
  }
  if (!input.empty()) {
    require_file(input, "input");
    FeatureSet fs = read_feature_set(input);
    if (pca) fs = apply_pca(*pca, fs);
    const auto sig = fisher::encode_image(fs, enc);
    ensure_parent(c.out);
    write_feature_set(c.out, Matrix(sig.values.transpose()), format_from_path(c.out));
    std::cout << sig.encoder_id << "\n";
    return;
  }
  if (a.manifest.empty()) throw UsageError("encode needs --input or --manifest");
  require_file(a.manifest, "manifest");
  const auto entries = read_manifest(a.manifest);
  std::vector<FeatureSet> images = load_split(a.manifest, "");
  if (pca)
    for (auto& im : images) im = apply_pca(*pca, im);
  const Matrix sigs = fisher::encode_images(images, enc);
  fs::create_directories(c.out / "signatures");
  std::vector<ManifestEntry> out;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const std::string rel = "signatures/" + entries[i].image_id + ".fvc";
    write_feature_set(c.out / rel, Matrix(sigs.row(Index(i))), FeatureFormat::binary);
    out.push_back({entries[i].image_id, rel, entries[i].label, entries[i].split});
  }
  write_manifest(c.out / "manifest.csv", out);
  write_text(c.out / "encoder.txt", fisher::encoder_id(enc) + "\n");
  std::cout << "encoded " << out.size() << " images with " << fisher::encoder_id(enc) << "\n";
}

// Signature rows and labels of one split of an `encode` output manifest.
void load_signatures(const std::string& manifest, const std::string& split, Matrix& x, std::vector<int>& y,
                     std::vector<std::string>* ids = nullptr) {
  require_file(manifest, "signature manifest");
  const auto images = load_split(manifest, split);
  x = stack_features(images);
  if (x.rows() != Index(images.size())) throw FormatError("signature files must hold exactly one row each");
  y.clear();
  for (const auto& im : images) {
    if (!im.label) throw FormatError("signature '" + im.image_id + "' has no label");
    y.push_back(*im.label);
    if (ids) ids->push_back(im.image_id);
  }
}

std::string metrics_csv(const classify::Metrics& m) {
  std::string s = "metric,class,value\n";
  s += "accuracy,," + fmt(m.accuracy) + "\n";
  for (std::size_t i = 0; i < m.class_ids.size(); ++i)
    s += "precision," + std::to_string(m.class_ids[i]) + "," + fmt(m.precision[i]) + "\n";
  for (std::size_t i = 0; i < m.class_ids.size(); ++i)
    s += "average_precision," + std::to_string(m.class_ids[i]) + "," + fmt(m.average_precision[i]) + "\n";
  s += "mean_average_precision,," + fmt(m.mean_average_precision) + "\n";
  return s;
}

void print_metrics(const classify::Metrics& m) {
  std::cout << std::left << std::setw(8) << "class" << std::right << std::setw(12) << "precision" << std::setw(12)
            << "AP" << "\n";
  std::cout << std::fixed << std::setprecision(4);
  for (std::size_t i = 0; i < m.class_ids.size(); ++i)
    std::cout << std::left << std::setw(8) << m.class_ids[i] << std::right << std::setw(12) << m.precision[i]
              << std::setw(12) << m.average_precision[i] << "\n";
  std::cout << "accuracy " << m.accuracy << "  mAP " << m.mean_average_precision << "\n";
}

void cmd_classify(const Context& c, const std::string& signatures, const std::string& train_split,
                  const std::string& test_split) {
  Matrix xtr, xte;
  std::vector<int> ytr, yte;
  std::vector<std::string> ids;
  load_signatures(signatures, train_split, xtr, ytr);
  load_signatures(signatures, test_split, xte, yte, &ids);
  classify::LinearTrainConfig l;
  l.l2 = c.cfg.get_real("linear.l2", l.l2);
  l.epochs = int(c.cfg.get_int("linear.epochs", l.epochs));
  l.lr = c.cfg.get_real("linear.lr", l.lr);
  l.seed = derive_seed(c.seed, 1);
  const auto res = classify::train_linear(xtr, ytr, l);
  fs::create_directories(c.out);
  save_model(c.out / "model.fvcm", res.model);
  std::string pred = "image_id,label,predicted\n";
  for (Index i = 0; i < xte.rows(); ++i)
    pred += ids[std::size_t(i)] + "," + std::to_string(yte[std::size_t(i)]) + "," +
            std::to_string(classify::predict(res.model, xte.row(i).transpose()).class_id) + "\n";
  write_text(c.out / "predictions.csv", pred);
  const auto metrics = classify::evaluate(res.model, xte, yte);
  write_text(c.out / "metrics.csv", metrics_csv(metrics));
  print_metrics(metrics);
}

void cmd_evaluate(const Context& c, const std::string& model, const std::string& signatures, const std::string& split) {
  require_file(model, "model");
  const auto m = load_linear_model(model);
  Matrix x;
  std::vector<int> y;
  load_signatures(signatures, split, x, y);
  const auto metrics = classify::evaluate(m, x, y);
  write_text(c.out, metrics_csv(metrics));
  print_metrics(metrics);
}

void cmd_bench_resolution(const Context& c) {
  experiments::ResolutionConfig r;
  const RunConfig& k = c.cfg;
  r.dims = k.get_list("bench.dims", r.dims);
  r.gmm_sizes = k.get_list("bench.gmm_sizes", r.gmm_sizes);
  r.basis_counts = k.get_list("bench.basis_counts", r.basis_counts);
  r.true_bases = k.get_int("bench.true_bases", r.true_bases);
  r.active = k.get_int("bench.active", r.active);
  r.laplace_scale = k.get_real("bench.laplace_scale", r.laplace_scale);
  r.noise_std = k.get_real("bench.noise_std", r.noise_std);
  r.train_features = k.get_int("bench.train_features", r.train_features);
  r.test_features = k.get_int("bench.test_features", r.test_features);
  r.sparsity = int(k.get_int("bench.sparsity", r.sparsity));
  r.gmm_iters = int(k.get_int("bench.gmm_iters", r.gmm_iters));
  r.dict_iters = int(k.get_int("bench.dict_iters", r.dict_iters));
  const auto rows = experiments::resolution_experiment(r, c.seed);
  std::ostringstream csv;
  experiments::write_resolution_csv(csv, rows);
  write_text(c.out, csv.str());
  std::cout << csv.str();
}

void add_globals(CLI::App* app, Globals& g, bool out_is_dir) {
  app->add_option("--config", g.config, "key = value configuration file");
  app->add_option("--seed", g.seed, "overrides the config seed");
  app->add_option("--threads", g.threads, "worker threads (0 = runtime default)");
  app->add_option("--out", g.out, out_is_dir ? "output directory" : "output file");
  app->add_option("--set", g.overrides, "extra key=value config entries")->take_all();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Compositional Fisher vector coding pipeline"};
  app.require_subcommand(1);
  Globals g;
  DataArgs data;
  std::string model, coder, input, signatures, test_split = "test";

  auto* synth_cmd = app.add_subcommand("synth", "generate a labelled synthetic image set");
  add_globals(synth_cmd, g, true);

  auto data_cmd = [&](const char* name, const char* help, bool with_pca) {
    auto* s = app.add_subcommand(name, help);
    add_globals(s, g, false);
    s->add_option("--manifest", data.manifest, "image manifest")->required();
    s->add_option("--split", data.split, "manifest split to train on");
    if (with_pca) s->add_option("--pca", data.pca, "PCA model applied to every feature first");
    return s;
  };
  auto* pca_cmd = data_cmd("train-pca", "fit a PCA projection", false);
  auto* dict_cmd = data_cmd("train-dict", "learn a dictionary", true);
  auto* hyb_cmd = data_cmd("train-hybrid-dict", "learn a (B_d, B_r) dictionary pair", true);
  hyb_cmd->add_option("--coder", coder, "supervised coder model")->required();
  auto* gmm_cmd = data_cmd("train-gmm", "fit a diagonal GMM", true);
  auto* sup_cmd = data_cmd("train-supcoder", "train the supervised coder", true);

  auto* enc_cmd = app.add_subcommand("encode", "compute image signatures");
  add_globals(enc_cmd, g, false);
  enc_cmd->add_option("--model", model, "dictionary, dictionary pair or GMM")->required();
  enc_cmd->add_option("--coder", coder, "supervised coder (dictionary pairs only)");
  enc_cmd->add_option("--pca", data.pca, "PCA model applied to every feature first");
  enc_cmd->add_option("--input", input, "single feature file");
  enc_cmd->add_option("--manifest", data.manifest, "image manifest (writes a signature directory)");

  auto* cls_cmd = app.add_subcommand("classify", "train a linear classifier and score the test split");
  add_globals(cls_cmd, g, true);
  cls_cmd->add_option("--signatures", signatures, "signature manifest from encode")->required();
  cls_cmd->add_option("--train-split", data.split, "split to train on");
  cls_cmd->add_option("--test-split", test_split, "split to score");

  auto* eval_cmd = app.add_subcommand("evaluate", "score a trained classifier");
  add_globals(eval_cmd, g, false);
  eval_cmd->add_option("--model", model, "linear model")->required();
  eval_cmd->add_option("--signatures", signatures, "signature manifest from encode")->required();
  eval_cmd->add_option("--split", test_split, "split to score");

  auto* bench_cmd = app.add_subcommand("bench-resolution", "GMM vs dictionary modelling resolution");
  add_globals(bench_cmd, g, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "error: usage: %s\n", e.what());
    return 2;
  }

  try {
    const Context c = make_context(g);
    if (synth_cmd->parsed()) cmd_synth(c);
    else if (pca_cmd->parsed()) cmd_train_pca(c, data);
    else if (dict_cmd->parsed()) cmd_train_dict(c, data);
    else if (hyb_cmd->parsed()) cmd_train_hybrid(c, data, coder);
    else if (gmm_cmd->parsed()) cmd_train_gmm(c, data);
    else if (sup_cmd->parsed()) cmd_train_supcoder(c, data);
    else if (enc_cmd->parsed()) cmd_encode(c, data, input, model, coder);
    else if (cls_cmd->parsed()) cmd_classify(c, signatures, data.split, test_split);
    else if (eval_cmd->parsed()) cmd_evaluate(c, model, signatures, test_split);
    else if (bench_cmd->parsed()) cmd_bench_resolution(c);
  } catch (const UsageError& e) {
    std::fprintf(stderr, "error: usage: %s\n", e.what());
    return 2;
  } catch (const FormatError& e) {
    std::fprintf(stderr, "error: format: %s\n", e.what());
    return 2;
  } catch (const ArgumentError& e) {
    std::fprintf(stderr, "error: argument: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: runtime: %s\n", e.what());
    return 1;
  }
  return 0;
}
