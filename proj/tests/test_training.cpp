#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "bhsrs/pca.hpp"
#include "bhsrs/predict.hpp"
#include "bhsrs/prune.hpp"
#include "bhsrs/rng.hpp"
#include "bhsrs/synth.hpp"
#include "bhsrs/train.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace bhsrs;

namespace {

NetworkConfig tiny_net(Mode mode, int64_t in_channels, int64_t n_classes) {
  NetworkConfig cfg;
  cfg.mode = mode;
  cfg.in_channels = in_channels;
  cfg.n_classes = n_classes;
  cfg.widths = {4, 6, 8};
  return cfg;
}

FeatureCube random_cube(int64_t h, int64_t w, int64_t bands, uint64_t seed) {
  FeatureCube cube;
  cube.h = h;
  cube.w = w;
  cube.bands = bands;
  cube.data.resize(static_cast<size_t>(h * w * bands));
  Rng rng(seed);
  for (auto& v : cube.data) v = rng.uniform();
  return cube;
}

std::vector<Sample> grid_samples(int64_t h, int64_t w, int64_t step, int64_t n_classes) {
  std::vector<Sample> out;
  int32_t cls = 0;
  for (int64_t y = 0; y < h; y += step) {
    for (int64_t x = 0; x < w; x += step) {
      out.push_back({y, x, cls});
      cls = (cls + 1) % static_cast<int32_t>(n_classes);
    }
  }
  return out;
}

}  // namespace

TEST_CASE("two one-hot draws give zero data noise and half a trace of disagreement") {
  // Draw 1 puts everything on class 0, draw 2 on class 1. Each draw alone is
  // perfectly confident (no aleatoric part), the ensemble disagrees
  // completely (epistemic covariance [[.25,-.25],[-.25,.25]]).
  const DrawStats s = uncertainty_from_draws({1.0, 0.0, 0.0, 1.0}, 2, 2);
  CHECK(s.mean == std::vector<double>{0.5, 0.5});
  for (double v : s.alea) CHECK(v == 0.0);
  CHECK(s.epi[0] == doctest::Approx(0.25));
  CHECK(s.epi[1] == doctest::Approx(-0.25));
  CHECK(s.epi[2] == doctest::Approx(-0.25));
  CHECK(s.epi[3] == doctest::Approx(0.25));
  CHECK(s.epi[0] + s.epi[3] == doctest::Approx(0.5));
}

TEST_CASE("a single confident draw is all data noise") {
  const DrawStats s = uncertainty_from_draws({0.7, 0.2, 0.1}, 1, 3);
  for (double v : s.epi) CHECK(v == doctest::Approx(0.0));
  CHECK(s.alea[0] == doctest::Approx(0.7 - 0.49));
  CHECK(s.alea[4] == doctest::Approx(0.2 - 0.04));
  CHECK(s.alea[1] == doctest::Approx(-0.14));
}

TEST_CASE("covariance components obey the total-variance decomposition") {
  // alea + epi must equal mean_t(diag(p_t)) - pbar pbar^T exactly: the two
  // parts split the predictive covariance with nothing lost or counted
  // twice.
  Rng rng(31);
  for (int trial = 0; trial < 25; ++trial) {
    CAPTURE(trial);
    const int64_t k = 2 + rng.integer(5);
    const int64_t draws = 1 + rng.integer(20);
    std::vector<double> p(static_cast<size_t>(draws * k));
    for (int64_t t = 0; t < draws; ++t) {
      double sum = 0.0;
      for (int64_t a = 0; a < k; ++a) {
        p[static_cast<size_t>(t * k + a)] = -std::log(rng.uniform() + 1e-12);
        sum += p[static_cast<size_t>(t * k + a)];
      }
      for (int64_t a = 0; a < k; ++a) p[static_cast<size_t>(t * k + a)] /= sum;
    }
    const DrawStats s = uncertainty_from_draws(p, draws, k);
    for (int64_t a = 0; a < k; ++a) {
      for (int64_t b = 0; b < k; ++b) {
        double want = -s.mean[static_cast<size_t>(a)] * s.mean[static_cast<size_t>(b)];
        if (a == b) {
          for (int64_t t = 0; t < draws; ++t) {
            want += p[static_cast<size_t>(t * k + a)] / static_cast<double>(draws);
          }
        }
        const double got =
            s.alea[static_cast<size_t>(a * k + b)] + s.epi[static_cast<size_t>(a * k + b)];
        CHECK(std::abs(got - want) < 1e-12);
      }
    }
    // Rows of both components sum to zero: probabilities are constrained to
    // the simplex, so total variance along (1,...,1) vanishes.
    for (int64_t a = 0; a < k; ++a) {
      double ra = 0.0, re = 0.0;
      for (int64_t b = 0; b < k; ++b) {
        ra += s.alea[static_cast<size_t>(a * k + b)];
        re += s.epi[static_cast<size_t>(a * k + b)];
      }
      CHECK(std::abs(ra) < 1e-12);
      CHECK(std::abs(re) < 1e-12);
    }
  }
}

TEST_CASE("ensemble prediction matches the reference accumulation draw by draw") {
  const FeatureCube cube = random_cube(12, 12, 3, 2);
  Rng init(5);
  Network net(tiny_net(Mode::BNN, 3, 4), init);
  const std::vector<Sample> samples = grid_samples(12, 12, 5, 4);
  const int64_t n = static_cast<int64_t>(samples.size());
  const int64_t draws = 7;
  const uint64_t seed = 99;

  // batch >= n keeps one chunk per pass, so a manual loop over spawned
  // streams sees the identical noise sequence.
  const EnsembleResult r = predict_ensemble(net, cube, samples, draws, seed, n);

  std::vector<double> all(static_cast<size_t>(draws * n * 4));
  Rng base(seed);
  for (int64_t t = 0; t < draws; ++t) {
    Rng draw_rng = base.spawn(static_cast<uint64_t>(t));
    const Tensor x = extract_patches(cube, samples, 0, n, 9);
    const Tensor logp = net.forward(x, &draw_rng, true);
    for (int64_t i = 0; i < n * 4; ++i) {
      all[static_cast<size_t>(t * n * 4 + i)] = std::exp(logp.data()[i]);
    }
  }
  for (int64_t i = 0; i < n; ++i) {
    std::vector<double> rows(static_cast<size_t>(draws * 4));
    for (int64_t t = 0; t < draws; ++t) {
      for (int64_t a = 0; a < 4; ++a) {
        rows[static_cast<size_t>(t * 4 + a)] = all[static_cast<size_t>((t * n + i) * 4 + a)];
      }
    }
    const DrawStats want = uncertainty_from_draws(rows, draws, 4);
    for (int64_t a = 0; a < 4; ++a) {
      CHECK(std::abs(r.mean_prob[static_cast<size_t>(i * 4 + a)] -
                     want.mean[static_cast<size_t>(a)]) < 1e-12);
      for (int64_t b = 0; b < 4; ++b) {
        CHECK(std::abs(r.alea(i, a, b) - want.alea[static_cast<size_t>(a * 4 + b)]) < 1e-12);
        CHECK(std::abs(r.epi(i, a, b) - want.epi[static_cast<size_t>(a * 4 + b)]) < 1e-12);
      }
    }
  }

  // Scalar summaries agree with the matrices.
  for (int64_t i = 0; i < n; ++i) {
    const int64_t c = r.predicted[static_cast<size_t>(i)];
    CHECK(r.var_pred[static_cast<size_t>(i)] == doctest::Approx(r.alea(i, c, c) + r.epi(i, c, c)));
  }

  // Determinism: same seed, draws and batch reproduce exactly.
  const EnsembleResult r2 = predict_ensemble(net, cube, samples, draws, seed, n);
  CHECK(r2.mean_prob == r.mean_prob);
  CHECK(r2.epistemic == r.epistemic);
}

TEST_CASE("point-estimate networks have exactly zero model disagreement") {
  const FeatureCube cube = random_cube(12, 12, 2, 8);
  Rng init(4);
  Network net(tiny_net(Mode::CNN, 2, 3), init);
  const std::vector<Sample> samples = grid_samples(12, 12, 6, 3);
  const EnsembleResult r = predict_ensemble(net, cube, samples, 50, 1, 64);
  CHECK(r.draws == 1);  // collapses: extra identical passes carry nothing
  for (double v : r.epistemic) CHECK(v == 0.0);
  const std::vector<double> mean = predict_mean(net, cube, samples, 64);
  CHECK(r.mean_prob == mean);
}

TEST_CASE("filter curve drops the most uncertain predictions first") {
  // Samples 0,1 right; 2,3 wrong; the wrong ones carry the top uncertainty.
  const std::vector<double> unc = {0.01, 0.02, 0.9, 0.8};
  const std::vector<int32_t> pred = {0, 1, 0, 1};
  const std::vector<int32_t> labels = {0, 1, 1, 0};

  const auto curve = uncertainty_filter_curve(unc, pred, labels, 2, {0.0, 0.25, 0.5},
                                              FilterPolicy::MostUncertain, 7);
  REQUIRE(curve.size() == 3);
  // Full set: every marginal is balanced, so agreement is pure chance.
  CHECK(curve[0].kept == 4);
  CHECK(curve[0].kappa == doctest::Approx(0.0));
  CHECK(curve[0].oa == doctest::Approx(0.5));
  // Errors leave in uncertainty order, so the curve climbs to perfect.
  CHECK(curve[1].kept == 3);
  CHECK(curve[1].kappa >= curve[0].kappa);
  CHECK(curve[2].kept == 2);
  CHECK(curve[2].kappa == doctest::Approx(1.0));
  CHECK(curve[2].oa == doctest::Approx(1.0));
  CHECK(curve[2].policy == FilterPolicy::MostUncertain);

  // Zero fraction under the random policy keeps everything too.
  const auto rnd = uncertainty_filter_curve(unc, pred, labels, 2, {0.0},
                                            FilterPolicy::Random, 99);
  CHECK(rnd[0].kappa == doctest::Approx(curve[0].kappa));
  CHECK(rnd[0].kept == 4);

  CHECK_THROWS_AS(uncertainty_filter_curve(unc, {0, 1}, labels, 2, {0.0},
                                           FilterPolicy::MostUncertain, 7),
                  InputError);
  CHECK_THROWS_AS(uncertainty_filter_curve(unc, pred, labels, 2, {1.0},
                                           FilterPolicy::MostUncertain, 7),
                  InputError);
  CHECK_THROWS_AS(uncertainty_filter_curve(unc, pred, labels, 2, {-0.1},
                                           FilterPolicy::MostUncertain, 7),
                  InputError);
}

TEST_CASE("random filtering is unbiased and the default grid is 0 to 0.5") {
  const auto fractions = default_filter_fractions();
  REQUIRE(fractions.size() == 11);
  CHECK(fractions.front() == 0.0);
  CHECK(fractions.back() == doctest::Approx(0.5));
  for (size_t i = 1; i < fractions.size(); ++i) {
    CHECK(fractions[i] - fractions[i - 1] == doctest::Approx(0.05));
  }

  // A random drop should not move kappa systematically: across many seeds
  // the mean filtered kappa stays within two standard errors of unfiltered.
  Rng rng(404);
  const int64_t n = 400;
  const int64_t k = 3;
  std::vector<int32_t> pred(n), labels(n);
  std::vector<double> unc(n);
  for (int64_t i = 0; i < n; ++i) {
    labels[static_cast<size_t>(i)] = static_cast<int32_t>(rng.integer(k));
    // Correlated predictions so kappa sits well away from 0.
    pred[static_cast<size_t>(i)] = rng.uniform() < 0.7
                                       ? labels[static_cast<size_t>(i)]
                                       : static_cast<int32_t>(rng.integer(k));
    unc[static_cast<size_t>(i)] = rng.uniform();
  }
  const auto base = uncertainty_filter_curve(unc, pred, labels, k, {0.0},
                                             FilterPolicy::MostUncertain, 0);
  const double kappa0 = base[0].kappa;

  const int n_seeds = 200;
  std::vector<double> kappas;
  for (int s = 0; s < n_seeds; ++s) {
    const auto c = uncertainty_filter_curve(unc, pred, labels, k, {0.3},
                                            FilterPolicy::Random, 1000 + s);
    kappas.push_back(c[0].kappa);
  }
  double mean = 0.0;
  for (double v : kappas) mean += v;
  mean /= n_seeds;
  double var = 0.0;
  for (double v : kappas) var += (v - mean) * (v - mean);
  var /= (n_seeds - 1);
  const double se = std::sqrt(var / n_seeds);
  CHECK(std::abs(mean - kappa0) < 2.0 * se + 1e-9);
}

TEST_CASE("scalar uncertainty reductions pick trace or the predicted entry") {
  EnsembleResult r;
  r.n = 1;
  r.k = 2;
  r.draws = 2;
  r.mean_prob = {0.5, 0.5};
  r.predicted = {0};
  r.aleatoric = {0.10, -0.10, -0.10, 0.10};
  r.epistemic = {0.25, -0.25, -0.25, 0.25};
  r.var_pred = {0.35};
  r.var_trace = {0.70};
  CHECK(scalar_uncertainty(r, UncertaintyReduction::Trace) == std::vector<double>{0.70});
  CHECK(scalar_uncertainty(r, UncertaintyReduction::PredictedClass) ==
        std::vector<double>{0.35});
  CHECK(reduction_from_name("trace") == UncertaintyReduction::Trace);
  CHECK(reduction_from_name("predicted-class") == UncertaintyReduction::PredictedClass);
  CHECK_THROWS_AS(reduction_from_name("mode"), InputError);
}

TEST_CASE("both covariance components are symmetric and positive semidefinite") {
  Rng rng(2024);
  for (int trial = 0; trial < 50; ++trial) {
    const int64_t draws = 2 + static_cast<int64_t>(rng.integer(6));
    const int64_t k = 2 + static_cast<int64_t>(rng.integer(4));
    std::vector<double> rows(static_cast<size_t>(draws * k));
    for (int64_t t = 0; t < draws; ++t) {
      double z = 0.0;
      for (int64_t a = 0; a < k; ++a) {
        const double e = std::exp(2.0 * rng.normal());
        rows[static_cast<size_t>(t * k + a)] = e;
        z += e;
      }
      for (int64_t a = 0; a < k; ++a) rows[static_cast<size_t>(t * k + a)] /= z;
    }
    const DrawStats s = uncertainty_from_draws(rows, draws, k);
    for (const std::vector<double>* m : {&s.alea, &s.epi}) {
      for (int64_t a = 0; a < k; ++a) {
        for (int64_t b = 0; b < k; ++b) {
          CHECK(std::abs((*m)[static_cast<size_t>(a * k + b)] -
                         (*m)[static_cast<size_t>(b * k + a)]) < 1e-15);
        }
      }
      const SymEig eig = jacobi_eigh(*m, k);
      for (double v : eig.values) CHECK(v >= -1e-9);
    }
  }
}

TEST_CASE("blobby scene is deterministic, labeled and class complete") {
  SynthConfig cfg;
  cfg.h = 32;
  cfg.w = 32;
  cfg.bands = 5;
  cfg.n_classes = 4;
  cfg.seed = 3;
  const SynthScene a = synth_scene(cfg);
  a.cube.validate();
  a.labels.validate();
  CHECK(a.labels.max_class() == 4);
  std::set<int32_t> present(a.labels.data.begin(), a.labels.data.end());
  CHECK(present == std::set<int32_t>{1, 2, 3, 4});
  for (double v : a.cube.data) CHECK(std::isfinite(v));

  const SynthScene b = synth_scene(cfg);
  CHECK(b.cube.data == a.cube.data);
  CHECK(b.labels.data == a.labels.data);
  cfg.seed = 4;
  const SynthScene c = synth_scene(cfg);
  CHECK(c.cube.data != a.cube.data);
}

TEST_CASE("classes in the scene are separable by their spectra") {
  SynthConfig cfg;
  cfg.h = 24;
  cfg.w = 24;
  cfg.noise = 0.0;
  cfg.illumination = 0.0;
  const SynthScene s = synth_scene(cfg);
  // Noise-free pixels of different classes differ in some band; same-class
  // pixels are identical.
  std::vector<std::vector<double>> spectra(5);
  for (int64_t y = 0; y < cfg.h; ++y) {
    for (int64_t x = 0; x < cfg.w; ++x) {
      const int32_t cls = s.labels.at(y, x);
      std::vector<double> v(static_cast<size_t>(cfg.bands));
      for (int64_t b = 0; b < cfg.bands; ++b) v[static_cast<size_t>(b)] = s.cube.at(b, y, x);
      if (spectra[static_cast<size_t>(cls)].empty()) {
        spectra[static_cast<size_t>(cls)] = v;
      } else {
        CHECK(spectra[static_cast<size_t>(cls)] == v);
      }
    }
  }
  for (int32_t c1 = 1; c1 <= 4; ++c1) {
    for (int32_t c2 = c1 + 1; c2 <= 4; ++c2) {
      CHECK(spectra[static_cast<size_t>(c1)] != spectra[static_cast<size_t>(c2)]);
    }
  }
}

TEST_CASE("training reduces the objective and is reproducible") {
  SynthConfig scfg;
  scfg.h = 28;
  scfg.w = 28;
  scfg.bands = 4;
  scfg.n_classes = 3;
  scfg.seed = 11;
  const SynthScene scene = synth_scene(scfg);
  const Split split = cc_train_split(scene.labels, 12, 0.3, 2);

  TrainConfig tcfg;
  tcfg.epochs = 6;
  tcfg.batch = 8;
  tcfg.seed = 42;

  for (Mode mode : {Mode::CNN, Mode::BNN}) {
    CAPTURE(mode_name(mode));
    const TrainResult r = train_network(tiny_net(mode, 4, 3), scene.cube, scene.labels, split, tcfg);
    REQUIRE(!r.diverged);
    REQUIRE(r.history.size() == 6);
    CHECK(r.history.back().train_loss < r.history.front().train_loss);
    CHECK(r.best_epoch >= 1);
    CHECK(r.best_epoch <= 6);
    for (const EpochStats& e : r.history) {
      CHECK(std::isfinite(e.train_loss));
      CHECK(e.val_kappa >= -1.0);
      CHECK(e.val_kappa <= 1.0);
      if (mode == Mode::CNN) CHECK(e.train_kl == 0.0);
      if (mode == Mode::BNN) CHECK(e.train_kl > 0.0);
    }

    const TrainResult r2 =
        train_network(tiny_net(mode, 4, 3), scene.cube, scene.labels, split, tcfg);
    REQUIRE(r2.history.size() == r.history.size());
    for (size_t i = 0; i < r.history.size(); ++i) {
      CHECK(r2.history[i].train_loss == r.history[i].train_loss);
      CHECK(r2.history[i].val_kappa == r.history[i].val_kappa);
    }
    const auto pa = r.net->named_params();
    const auto pb = r2.net->named_params();
    for (size_t i = 0; i < pa.size(); ++i) CHECK(pa[i].second.vec() == pb[i].second.vec());
  }
}

TEST_CASE("training validates its inputs") {
  const SynthScene scene = synth_scene({});
  const Split split = cc_train_split(scene.labels, 10, 0.2, 1);
  TrainConfig tcfg;
  tcfg.epochs = -1;
  CHECK_THROWS_AS(train_network(tiny_net(Mode::CNN, 8, 4), scene.cube, scene.labels, split, tcfg),
                  InputError);

  // Zero epochs is a request for the untrained network, not an error.
  tcfg.epochs = 0;
  const TrainResult untrained =
      train_network(tiny_net(Mode::CNN, 8, 4), scene.cube, scene.labels, split, tcfg);
  CHECK(untrained.best_epoch == 0);
  CHECK(untrained.history.empty());

  tcfg.epochs = 1;
  CHECK_THROWS_AS(train_network(tiny_net(Mode::CNN, 5, 4), scene.cube, scene.labels, split, tcfg),
                  InputError);  // channel mismatch
}

TEST_CASE("pruning removes exactly the weakest weights") {
  for (Mode mode : {Mode::CNN, Mode::BNN}) {
    CAPTURE(mode_name(mode));
    Rng rng(13);
    Network net(tiny_net(mode, 3, 4), rng);
    const int64_t total = prunable_count(net);
    REQUIRE(total > 100);
    const std::vector<double> scores = prune_scores(net);
    REQUIRE(static_cast<int64_t>(scores.size()) == total);

    // The expected kill set: indices of the llround(0.3 * total) smallest
    // scores under the same tie rule.
    const int64_t n_prune = std::llround(0.3 * static_cast<double>(total));
    std::vector<int64_t> order(static_cast<size_t>(total));
    for (int64_t i = 0; i < total; ++i) order[static_cast<size_t>(i)] = i;
    std::sort(order.begin(), order.end(), [&](int64_t a, int64_t b) {
      const double sa = scores[static_cast<size_t>(a)], sb = scores[static_cast<size_t>(b)];
      return sa != sb ? sa < sb : a < b;
    });
    std::set<int64_t> expect_killed(order.begin(), order.begin() + n_prune);

    Network pruned = net.clone();
    CHECK(prune_network(pruned, 0.3) == n_prune);
    int64_t flat = 0;
    int64_t killed_seen = 0;
    for (const auto& p : pruned.prunable()) {
      for (int64_t i = 0; i < p.w_or_mu.numel(); ++i, ++flat) {
        const bool zeroed = p.w_or_mu.data()[i] == 0.0 &&
                            (!p.rho.defined() || p.rho.data()[i] == -1000.0);
        if (expect_killed.count(flat)) {
          CHECK(zeroed);
          ++killed_seen;
        } else {
          CHECK(!zeroed);
        }
      }
    }
    CHECK(killed_seen == n_prune);

    // Growing the fraction in two steps lands on the same weights as one.
    Network two_step = net.clone();
    prune_network(two_step, 0.1);
    prune_network(two_step, 0.3);
    const auto pa = pruned.named_params();
    const auto pb = two_step.named_params();
    for (size_t i = 0; i < pa.size(); ++i) CHECK(pa[i].second.vec() == pb[i].second.vec());

    // Full pruning silences every connection and the scores say so.
    Network dead = net.clone();
    prune_network(dead, 1.0);
    for (double sc : prune_scores(dead)) CHECK(sc == 0.0);

    // A fully pruned network still runs and emits finite probabilities.
    const FeatureCube cube = random_cube(11, 11, 3, 6);
    const std::vector<double> probs = predict_mean(dead, cube, {{5, 5, 0}}, 4);
    for (double v : probs) CHECK(std::isfinite(v));
  }
  Rng rng(1);
  Network net(tiny_net(Mode::CNN, 3, 4), rng);
  CHECK_THROWS_AS(prune_network(net, 1.5), InputError);
  CHECK_THROWS_AS(prune_network(net, -0.1), InputError);
}

TEST_CASE("signal-to-noise scores match high-precision references") {
  // sigma = softplus(rho) is pinned to 50-digit reference values at several
  // rho, anchoring the ranking quantity |mu|/softplus(rho) independently of
  // the layer code.
  struct Case {
    double mu, rho, want_sigma;
  };
  // softplus values computed with 50-digit arithmetic.
  const Case cases[] = {
      {0.3, -1.0, 0.31326168751822283405},
      {-2.0, 0.5, 0.97407698418010668087},
      {1.0, -5.0, 0.0067153484891180686164},
      {-0.25, -10.0, 4.5398899216864646769e-05},
  };
  for (const Case& c : cases) {
    Rng rng(2);
    Network net(tiny_net(Mode::BNN, 3, 4), rng);
    auto prunable = net.prunable();
    prunable[0].w_or_mu.data()[0] = c.mu;
    prunable[0].rho.data()[0] = c.rho;
    const double got = prune_scores(net)[0];
    CHECK(got == doctest::Approx(std::abs(c.mu) / c.want_sigma).epsilon(1e-14));
  }
}
