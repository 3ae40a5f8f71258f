// Acceptance run: one [PASS]/[FAIL] line per criterion, exit status 0 only
// when every criterion passes or fails in the documented way (see
// kKnownFailures).

#include "cfv/classify.hpp"
#include "cfv/dataio.hpp"
#include "cfv/dict_learn.hpp"
#include "cfv/experiments.hpp"
#include "cfv/fisher.hpp"
#include "cfv/gmm.hpp"
#include "cfv/sparse.hpp"
#include "cfv/supcode.hpp"
#include "cfv/synth.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>

namespace fs = std::filesystem;
using namespace cfv;
using namespace cfv::oracle;

namespace {

// Criteria expected to fail; see the README section on the hybrid benchmark.
const std::set<int> kKnownFailures = {6};

struct Outcome {
  bool pass = true;
  std::string detail;
};

Dictionary random_dict(Index d, Index m, std::uint64_t seed) { return Dictionary(synth::random_unit_bases(d, m, seed)); }

std::string num(double v, int prec = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", prec, v);
  return buf;
}

// -- 1 ------------------------------------------------------------------------

Outcome gradient_oracles() {
  double worst = 0;
  int n = 0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Index d = 4 + Index(s % 13), m = 2 + Index(s % 7);
    const Dictionary b = random_dict(d, m, 500 + s);
    const Vector x = test::random_vector(d, 600 + s);
    sparse::MpConfig cfg;
    cfg.k = int(std::min<Index>(m, 1 + Index(s % 3)));
    cfg.sigma2 = 0.4 + 0.3 * double(s % 5);
    const Vector u = sparse::mp_encode(b, x, cfg.k).code.values;
    const Matrix fd = test::finite_difference([&](const Matrix& bb) { return gauss_loglik(x, bb * u, cfg.sigma2); },
                                              b.bases());
    worst = std::max(worst, test::rel_error(fisher::scfvc_encode(b, x, cfg).gradient, fd));
    ++n;
  }
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Index d = 4 + Index(s % 13), m1 = 2 + Index(s % 5), m2 = 2 + Index((s / 2) % 7);
    const Dictionary bd = random_dict(d, m1, 700 + s), br = random_dict(d, m2, 800 + s);
    const Vector x = test::random_vector(d, 900 + s), c = test::random_vector(m1, 1000 + s);
    sparse::MpConfig cfg;
    cfg.k1 = 1 + int(s % 2);
    cfg.k2 = 1 + int((s / 3) % 2);
    cfg.lambda = 0.5;
    cfg.sigma2 = 0.5 + 0.5 * double(s % 3);
    const auto h = sparse::hybrid_mp_encode(bd, br, x, c, cfg);
    const auto [gd, gr] = fisher::hscfvc_encode(bd, br, x, c, cfg);
    const Matrix fd_d = test::finite_difference(
        [&](const Matrix& b) { return gauss_loglik(x, b * h.d.values + br.bases() * h.r.values, cfg.sigma2); },
        bd.bases());
    const Matrix fd_r = test::finite_difference(
        [&](const Matrix& b) { return gauss_loglik(x, bd.bases() * h.d.values + b * h.r.values, cfg.sigma2); },
        br.bases());
    worst = std::max({worst, test::rel_error(gd.gradient, fd_d), test::rel_error(gr.gradient, fd_r)});
    ++n;
  }
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Index k = 2 + Index(s % 7), d = 2 + Index(s % 15);
    const gmm::GmmModel m = random_gmm(k, d, 1100 + 5 * s);
    const Vector x = test::random_vector(d, 1200 + s);
    const Matrix fd = test::finite_difference([&](const Matrix& mu) { return gmm_loglik(m, mu, x); }, m.means);
    const Matrix want = (fd.array() * m.variances.cwiseSqrt().array()).matrix().transpose();
    worst = std::max(worst, test::rel_error(fisher::gmmfvc_encode(m, x).gradient, want));
    ++n;
  }
  return {worst < 1e-5, std::to_string(n) + " instances, worst relative error " + num(worst)};
}

// -- 2 ------------------------------------------------------------------------

Outcome inference_oracles() {
  double worst = 0;
  int n = 0;
  for (std::uint64_t s = 0; s < 60; ++s) {
    const Index d = 3 + Index(s % 6), m = 2 + Index(s % 4);
    const int k = 1 + int(s % 2);
    const Dictionary b = random_dict(d, m, 2000 + s);
    const Vector x = test::random_vector(d, 2100 + s);
    const Vector got = sparse::mp_encode(b, x, k).code.values;
    const Vector want = mp_oracle(b.bases(), x, k);
    worst = std::max(worst, std::abs(naive_sq_residual(b.bases(), x, got) - naive_sq_residual(b.bases(), x, want)));
    ++n;
  }
  for (std::uint64_t s = 0; s < 60; ++s) {
    const Index d = 4 + Index(s % 5), m1 = 2 + Index(s % 4), m2 = 2 + Index((s / 3) % 4);
    sparse::MpConfig cfg;
    cfg.k1 = int(s % 3);
    cfg.k2 = 1 + int((s / 2) % 2);
    cfg.lambda = 0.1 + 0.3 * double(s % 5);
    const Dictionary bd = random_dict(d, m1, 2200 + s), br = random_dict(d, m2, 2300 + s);
    const Vector x = test::random_vector(d, 2400 + s), c = test::random_vector(m1, 2500 + s);
    const auto h = sparse::hybrid_mp_encode(bd, br, x, c, cfg);
    const auto [ud, ur] = hybrid_oracle(bd.bases(), br.bases(), x, c, cfg);
    const double got = naive_hybrid(bd.bases(), br.bases(), x, h.d.values, h.r.values, c, cfg.lambda);
    const double want = naive_hybrid(bd.bases(), br.bases(), x, ud, ur, c, cfg.lambda);
    worst = std::max(worst, std::abs(got - want));
    ++n;
  }
  return {worst < 1e-9, std::to_string(n) + " instances, worst objective gap " + num(worst)};
}

// -- 3 ------------------------------------------------------------------------

bool same_bits(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.data(), b.data(), sizeof(double) * std::size_t(a.size())) == 0;
}

Outcome reductions() {
  int bad = 0, n = 0;
  double worst_lambda = 0;
  for (std::uint64_t s = 0; s < 30; ++s) {
    const Index d = 5 + Index(s % 8), m1 = 2 + Index(s % 4), m2 = 2 + Index(s % 6);
    const Dictionary bd = random_dict(d, m1, 3000 + s), br = random_dict(d, m2, 3100 + s);
    const Vector x = test::random_vector(d, 3200 + s), c = test::random_vector(m1, 3300 + s);
    sparse::MpConfig cfg;
    cfg.k1 = 0;
    cfg.k2 = 1 + int(s % Index(m2));
    cfg.k = cfg.k2;
    const auto h = sparse::hybrid_mp_encode(bd, br, x, c, cfg);
    const auto ref = sparse::mp_encode(br, x, cfg.k2);
    if (!h.d.values.isZero(0.0) || !same_bits(h.r.values, ref.code.values) || !same_bits(h.residual, ref.residual))
      ++bad;
    const auto [gd, gr] = fisher::hscfvc_encode(bd, br, x, c, cfg);
    if (!gd.gradient.isZero(0.0) || !same_bits(gr.gradient, fisher::scfvc_encode(br, x, cfg).gradient)) ++bad;

    sparse::MpConfig big;
    big.k1 = 1;
    big.k2 = 0;
    big.lambda = 1e9;
    const auto g = sparse::hybrid_mp_encode(bd, br, x, c, big);
    if (g.d.nnz() != 1) {
      ++bad;
    } else {
      const Index j = g.d.support[0];
      worst_lambda = std::max(worst_lambda, std::abs(g.d.values(j) - c(j)));
    }
    ++n;
  }
  return {bad == 0 && worst_lambda < 1e-6, std::to_string(n) + " instances, " + std::to_string(bad) +
                                               " mismatches, worst |u_dj - c_j| " + num(worst_lambda)};
}

// -- 4 ------------------------------------------------------------------------

Outcome resolution() {
  experiments::ResolutionConfig cfg;
  cfg.train_features = 1000;
  cfg.gmm_iters = 10;
  int good = 0;
  std::ostringstream detail;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto rows = experiments::resolution_experiment(cfg, seed);
    bool ok = true;
    for (Index dim : cfg.dims) {
      double sc = 0;
      std::vector<double> g;
      for (const auto& r : rows) {
        if (r.dim != dim) continue;
        if (r.model == "sc") sc = r.mean_distance;
        else g.push_back(r.mean_distance);
      }
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (!(sc < g[i])) ok = false;
        if (i > 0 && g[i] > g[i - 1] * 1.05) ok = false;
      }
      if (seed == 0) detail << "D=" << dim << " sc " << num(sc, 3) << " gmm " << num(g.front(), 3) << ".." << num(g.back(), 3) << "; ";
    }
    good += ok;
  }
  detail << good << "/5 seeds ordered";
  return {good == 5, detail.str()};
}

// -- 5 and 6 ------------------------------------------------------------------

Matrix subsample(const Matrix& a, Index n, std::uint64_t seed) {
  if (n >= a.rows()) return a;
  std::vector<Index> idx(static_cast<std::size_t>(a.rows()));
  std::iota(idx.begin(), idx.end(), Index{0});
  Rng rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(static_cast<std::size_t>(n));
  std::sort(idx.begin(), idx.end());
  Matrix out(n, a.cols());
  for (Index i = 0; i < n; ++i) out.row(i) = a.row(idx[std::size_t(i)]);
  return out;
}

std::vector<int> labels_of(const std::vector<FeatureSet>& images) {
  std::vector<int> y;
  for (const auto& im : images) y.push_back(*im.label);
  return y;
}

double test_accuracy(const Matrix& train, const std::vector<int>& ytr, const Matrix& test, const std::vector<int>& yte,
                     std::uint64_t seed) {
  classify::LinearTrainConfig cfg;
  cfg.seed = seed;
  const auto fit = classify::train_linear(train, ytr, cfg);
  return classify::evaluate(fit.model, test, yte).accuracy;
}

double encoder_accuracy(const synth::ImageDataset& ds, const fisher::Encoder& e, std::uint64_t seed) {
  return test_accuracy(fisher::encode_images(ds.train, e), labels_of(ds.train), fisher::encode_images(ds.test, e),
                       labels_of(ds.test), seed);
}

Outcome end_to_end() {
  int good = 0;
  std::ostringstream detail;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const synth::ImageDataset ds = synth::make_dataset_I(synth::DatasetIConfig{}, seed);
    const Matrix rows = subsample(stack_features(ds.train), 5000, seed);
    const Index m = 32;
    dict::DictLearnConfig dc;
    dc.iters = 10;
    dc.seed = seed;
    sparse::MpConfig mp;
    mp.k = 5;
    const fisher::Encoder sc = fisher::ScfvcEncoder{dict::learn_dictionary(rows, m, dc).dictionary, mp};
    gmm::GmmConfig gc;
    gc.max_iters = 50;
    gc.seed = seed;
    const fisher::Encoder gm = fisher::GmmFvcEncoder{gmm::fit_gmm(rows, m, gc).model, false};
    const double a_sc = encoder_accuracy(ds, sc, seed), a_gmm = encoder_accuracy(ds, gm, seed);
    good += a_sc >= 0.90 && a_sc >= a_gmm;
    detail << num(a_sc, 3) << "/" << num(a_gmm, 3) << " ";
  }
  detail << "(scfvc/gmmfvc), " << good << "/5 seeds pass";
  return {good >= 4, detail.str()};
}

Outcome hybrid_combination() {
  int good = 0;
  std::ostringstream detail;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const synth::DatasetIIConfig dc;
    const synth::ImageDataset ds = synth::make_dataset_II(dc, seed);
    const auto ytr = labels_of(ds.train), yte = labels_of(ds.test);

    supcode::SupTrainConfig sc;
    sc.seed = seed;
    const auto sup = supcode::train_sup_encoder(ds.train, dc.m1, sc);
    auto pooled = [&](const std::vector<FeatureSet>& images) {
      Matrix p(Index(images.size()), dc.m1);
      for (std::size_t i = 0; i < images.size(); ++i)
        p.row(Index(i)) = supcode::pooled_representation(sup.encoder, images[i].features, sc.power_eps).transpose();
      return p;
    };
    const double a_sup = test_accuracy(pooled(ds.train), ytr, pooled(ds.test), yte, seed);

    const Matrix rows = subsample(stack_features(ds.train), 3000, seed);
    sparse::MpConfig mp;
    mp.k1 = 3;
    mp.k2 = 4;
    mp.k = mp.k1 + mp.k2;
    mp.lambda = 0.5;
    dict::HybridLearnConfig hc;
    hc.k1 = mp.k1;
    hc.k2 = mp.k2;
    hc.lambda = mp.lambda;
    hc.iters = 10;
    hc.seed = seed;
    const auto pair =
        dict::learn_hybrid_dictionaries(rows, supcode::guidance_codes(sup.encoder, rows, mp.k1), dc.m1, dc.m2, hc);
    const fisher::Encoder he = fisher::HscfvcEncoder{pair.bases_d, pair.bases_r, sup.encoder, mp};
    dict::DictLearnConfig lc;
    lc.k = mp.k;
    lc.iters = 10;
    lc.seed = seed;
    const fisher::Encoder se = fisher::ScfvcEncoder{dict::learn_dictionary(rows, dc.m1 + dc.m2, lc).dictionary, mp};

    const double a_h = encoder_accuracy(ds, he, seed), a_s = encoder_accuracy(ds, se, seed);
    good += a_h >= std::max(a_s, a_sup) - 0.02;
    detail << num(a_h, 3) << "/" << num(a_s, 3) << "/" << num(a_sup, 3) << " ";
  }
  detail << "(hscfvc/scfvc/supc), " << good << "/5 seeds pass";
  return {good >= 4, detail.str()};
}

// -- 7 ------------------------------------------------------------------------

Outcome monotonicity() {
  double worst = 0;  // largest violation seen
  auto bump = [&](double v) { worst = std::max(worst, v); };

  for (std::uint64_t s = 0; s < 8; ++s) {
    gmm::GmmConfig cfg;
    cfg.seed = s;
    cfg.tol = 0;
    cfg.max_iters = 40;
    const Matrix x = test::random_matrix(300, 4, 4000 + s);
    const auto fit = gmm::fit_gmm(x, 3 + Index(s % 3), cfg);
    for (std::size_t i = 1; i < fit.log_likelihood.size(); ++i)
      bump(fit.log_likelihood[i - 1] - fit.log_likelihood[i]);
  }

  for (std::uint64_t s = 0; s < 20; ++s) {
    const Dictionary b = random_dict(10, 8, 4100 + s);
    const Vector x = test::random_vector(10, 4200 + s);
    double prev = x.squaredNorm();
    for (int k = 1; k <= 8; ++k) {
      const double r = sparse::mp_encode(b, x, k).residual.squaredNorm();
      bump(r - prev);
      prev = r;
    }
  }

  for (std::uint64_t s = 0; s < 20; ++s) {
    const Dictionary bd = random_dict(10, 6, 4300 + s), br = random_dict(10, 8, 4400 + s);
    const Vector x = test::random_vector(10, 4500 + s), c = test::random_vector(6, 4600 + s);
    double prev = naive_hybrid(bd.bases(), br.bases(), x, Vector::Zero(6), Vector::Zero(8), c, 0.5);
    for (int step = 1; step <= 14; ++step) {
      sparse::MpConfig cfg;
      cfg.k1 = std::min(step, 6);
      cfg.k2 = std::max(0, step - 6);
      const auto h = sparse::hybrid_mp_encode(bd, br, x, c, cfg);
      const double v = naive_hybrid(bd.bases(), br.bases(), x, h.d.values, h.r.values, c, 0.5);
      bump(v - prev);
      prev = v;
    }
  }

  for (std::uint64_t s = 0; s < 20; ++s) {
    Matrix g = test::random_matrix(7, 5, 4700 + s);
    g.col(Index(s % 5)).setZero();
    const Matrix n = fisher::intra_normalize(fisher::FisherBlock{g}).gradient;
    for (Index j = 0; j < n.cols(); ++j) {
      const double norm = n.col(j).norm();
      bump(std::min(std::abs(norm - 1.0), norm));
    }
    const Vector v = test::random_vector(40, 4800 + s, 5.0);
    bump((fisher::power_normalize(v, 1.0) - v).cwiseAbs().maxCoeff());
  }
  return {worst <= 1e-9, "largest violation " + num(worst)};
}

// -- 8 ------------------------------------------------------------------------

std::uint64_t fnv1a(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::uint64_t h = 1469598103934665603ULL;
  char ch;
  while (in.get(ch)) {
    h ^= static_cast<unsigned char>(ch);
    h *= 1099511628211ULL;
  }
  return h;
}

std::map<std::string, std::uint64_t> tree_hashes(const fs::path& root) {
  std::map<std::string, std::uint64_t> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = fnv1a(e.path());
  return out;
}

bool run_cli(const fs::path& dir, const std::string& args) {
  const std::string cmd = "cd '" + dir.string() + "' && '" CFV_CLI_PATH "' " + args + " >/dev/null 2>&1";
  return std::system(cmd.c_str()) == 0;
}

bool cli_pipeline(const fs::path& dir, int threads) {
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string t = " --threads " + std::to_string(threads) + " --seed 3";
  const char* steps[] = {
      "synth --out d1 --set synth.train_per_class=10 --set synth.test_per_class=5",
      "synth --out d2 --set synth.model=II --set synth.train_per_class=10 --set synth.test_per_class=5",
      "train-pca --manifest d1/manifest.csv --out pca.fvcm --set pca.dim=40",
      "train-dict --manifest d1/manifest.csv --pca pca.fvcm --out dict.fvcm --set dict.m=16 --set dict.iters=3",
      "train-gmm --manifest d1/manifest.csv --out gmm.fvcm --set gmm.k=8 --set gmm.iters=10",
      "train-supcoder --manifest d2/manifest.csv --out sup.fvcm --set sup.epochs=5",
      "train-hybrid-dict --manifest d2/manifest.csv --coder sup.fvcm --out pair.fvcm --set hybrid.m2=16 "
      "--set hybrid.k1=3 --set hybrid.k2=3 --set hybrid.iters=3",
      "encode --model dict.fvcm --pca pca.fvcm --manifest d1/manifest.csv --out s1",
      "encode --model gmm.fvcm --manifest d1/manifest.csv --out s2 --set encode.variance_gradients=true",
      "encode --model pair.fvcm --coder sup.fvcm --manifest d2/manifest.csv --out s3 --set encode.k1=3 --set encode.k2=3",
      "encode --model dict.fvcm --pca pca.fvcm --input d1/images/test_0_0.fvc --out one.fvc",
      "classify --signatures s1/manifest.csv --out c1",
      "classify --signatures s3/manifest.csv --out c3",
      "evaluate --model c1/model.fvcm --signatures s1/manifest.csv --out eval.csv",
      "bench-resolution --out res.csv --set bench.dims=20 --set bench.gmm_sizes=4,8 --set bench.basis_counts=8 "
      "--set bench.true_bases=12 --set bench.train_features=200 --set bench.test_features=50",
  };
  for (const char* s : steps)
    if (!run_cli(dir, std::string(s) + t)) {
      std::fprintf(stderr, "cli step failed: %s\n", s);
      return false;
    }
  return true;
}

Outcome determinism() {
  const fs::path base = fs::temp_directory_path() / "cfv_acceptance_cli";
  if (!cli_pipeline(base / "a", 1) || !cli_pipeline(base / "b", 1) || !cli_pipeline(base / "c", 3))
    return {false, "a CLI step exited non-zero"};
  const auto a = tree_hashes(base / "a"), b = tree_hashes(base / "b"), c = tree_hashes(base / "c");
  int diff = 0;
  for (const auto& [name, h] : a) {
    diff += !b.count(name) || b.at(name) != h;
    diff += !c.count(name) || c.at(name) != h;
  }
  fs::remove_all(base);
  return {diff == 0 && a.size() == b.size() && a.size() == c.size(),
          std::to_string(a.size()) + " output files, " + std::to_string(diff) + " hash mismatches across 3 runs"};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    Outcome (*run)();
  };
  const Criterion all[] = {
      {1, "gradient oracles", gradient_oracles},   {2, "inference oracles", inference_oracles},
      {3, "exact reductions", reductions},         {4, "modelling resolution", resolution},
      {5, "end-to-end scfvc vs gmmfvc", end_to_end}, {6, "hybrid combination", hybrid_combination},
      {7, "monotonicity and normalisation", monotonicity}, {8, "CLI determinism", determinism},
  };
  bool unexpected = false;
  for (const auto& c : all) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool known = kKnownFailures.count(c.id) != 0;
    std::printf("[%s] criterion %d: %s: %s (%.1f s)%s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(),
                secs, !o.pass && known ? " [known failure]" : "");
    std::fflush(stdout);
    if (o.pass == known) unexpected = true;
  }
  return unexpected ? 1 : 0;
}
