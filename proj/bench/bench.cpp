// Wall-clock comparison of the OpenMP kernels against their serial
// references. Usage: cfv_bench [threads] [repeats]

#include "cfv/dataio.hpp"
#include "cfv/fisher.hpp"
#include "cfv/gmm.hpp"
#include "cfv/sparse.hpp"
#include "cfv/synth.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>

using namespace cfv;

namespace {

double best_of(int repeats, const std::function<void()>& f) {
  double best = 1e300;
  for (int r = 0; r < repeats; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }
  return best;
}

void report(const char* name, double serial, double parallel, bool identical) {
  std::printf("%-28s serial %9.4f s  parallel %9.4f s  speedup %5.2fx  %s\n", name, serial, parallel,
              serial / parallel, identical ? "bit-identical" : "DIFFERENT");
}

}  // namespace

int main(int argc, char** argv) {
  const int threads = argc > 1 ? std::atoi(argv[1]) : 0;
  const int repeats = argc > 2 ? std::atoi(argv[2]) : 3;
  set_num_threads(threads);
  std::printf("threads: %d\n", num_threads());

  const Index d = 128, m = 128, n = 2000;
  const Dictionary bases(synth::random_unit_bases(d, m, 1));
  synth::GenModelI gen{bases.bases(), 1.0, 0.1};
  Matrix rows(n, d);
  for (Index i = 0; i < n; ++i) rows.row(i) = synth::sample_feature_I(gen, derive_seed(7, std::uint64_t(i))).x.transpose();
  const FeatureSet image{rows, "bench", std::nullopt};

  sparse::MpConfig mp;
  mp.k = 10;
  const fisher::Encoder enc = fisher::ScfvcEncoder{bases, mp};
  fisher::ImageSignature a, b;
  const double s_enc = best_of(repeats, [&] { a = fisher::encode_image_serial(image, enc); });
  const double p_enc = best_of(repeats, [&] { b = fisher::encode_image(image, enc); });
  report("scfvc encode_image", s_enc, p_enc, a.values == b.values);

  Matrix codes_s(n, m), codes_p;
  const double s_mp = best_of(repeats, [&] {
    for (Index i = 0; i < n; ++i) codes_s.row(i) = sparse::mp_encode(bases, rows.row(i).transpose(), mp.k).code.values.transpose();
  });
  const double p_mp = best_of(repeats, [&] { codes_p = sparse::mp_encode_rows(bases, rows, mp.k); });
  report("matching pursuit (rows)", s_mp, p_mp, codes_s == codes_p);

  gmm::GmmConfig gc;
  gc.max_iters = 5;
  const gmm::GmmModel g = gmm::fit_gmm(rows, 64, gc).model;
  Matrix resp_s(n, g.components()), resp_p;
  const double s_e = best_of(repeats, [&] {
    for (Index i = 0; i < n; ++i) resp_s.row(i) = gmm::responsibilities(g, rows.row(i).transpose()).transpose();
  });
  const double p_e = best_of(repeats, [&] { resp_p = gmm::responsibilities_rows(g, rows); });
  report("gmm E-step (rows)", s_e, p_e, resp_s == resp_p);

  const fisher::Encoder genc = fisher::GmmFvcEncoder{g, true};
  const double s_g = best_of(repeats, [&] { a = fisher::encode_image_serial(image, genc); });
  const double p_g = best_of(repeats, [&] { b = fisher::encode_image(image, genc); });
  report("gmmfvc encode_image", s_g, p_g, a.values == b.values);
  return 0;
}
