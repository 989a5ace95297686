#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "cheom/config.hpp"
#include "cheom/experiments.hpp"
#include "cheom/io.hpp"
#include "cheom/measures.hpp"
#include "helpers.hpp"

using namespace cheom;
using namespace testutil;
using nlohmann::json;

namespace {

json minimal_jc() {
  return json::parse(R"({
    "name": "t", "unit_frequency": "omega",
    "system": {"type": "jaynes_cummings", "omega": 1.0, "epsilon": 0.0},
    "modes": [{"g": 2.0, "delta": 1.0, "kappa": 3.0, "detection": "homodyne"}],
    "k_max": 2, "dt": 1e-3, "t_final": 0.5, "record_every": 10,
    "ensemble": {"trajectories": 3, "master_seed": 7},
    "outputs": ["purity", "bloch"], "oracle": {"n_max": [3]}
  })");
}

std::string error_path(const json& j) {
  try {
    parse_config(j);
  } catch (const ConfigError& e) {
    return e.path();
  }
  return "";
}

}  // namespace

TEST_CASE("config parsing and validation") {
  ScenarioConfig c = parse_config(minimal_jc());
  CHECK(c.modes.size() == 1);
  CHECK(*c.modes[0].g == 2.0);
  CHECK(c.steps() == 500u);
  CHECK(parse_config(c.to_json()).to_json() == c.to_json());

  json j = minimal_jc();
  j["modes"][0]["kappa"] = -1.0;
  CHECK(error_path(j) == "modes[0].kappa");
  j = minimal_jc();
  j["modes"][0]["kapa"] = 1.0;
  CHECK(error_path(j) == "modes[0].kapa");
  j = minimal_jc();
  j.erase("modes");
  CHECK(error_path(j) == "modes");

  json d = json::parse(R"({
    "system": {"type": "dicke_clusters", "Omega": 1.0, "n_clusters": 3, "n_atoms": 3,
               "g_matrix": [[0.4, 0.1, 0.0], [0.1, 0.4, 0.1]]},
    "modes": [{"kappa": 2.0}, {"kappa": 2.0}, {"kappa": 2.0}]
  })");
  CHECK(error_path(d) == "system.g_matrix");
}

TEST_CASE("bundled configs parse") {
  const std::filesystem::path dir = CHEOM_SOURCE_DIR "/configs";
  int n = 0;
  for (const auto& f : std::filesystem::directory_iterator(dir)) {
    if (f.path().extension() != ".json") continue;
    CHECK_NOTHROW(make_scenario(parse_config_file(f.path().string())));
    ++n;
  }
  CHECK(n >= 5);
  auto undriven = parse_config_file((dir / "jc_undriven.json").string());
  CHECK(*undriven.modes[0].g == 2.0);
  CHECK(undriven.modes[0].kappa == 3.0);
  CHECK(undriven.modes[0].delta == 1.0);
}

TEST_CASE("builders") {
  auto sq = make_scenario(build_spin_squeezing(1.0, 10, 0.5, 1.0, std::nullopt));
  auto r = spin_squeezing(sq.rho0, 10);
  CHECK(r.mean_jx == doctest::Approx(5.0));
  CHECK(std::abs((spin_operator(sq, 'z') * sq.rho0).trace()) < 1e-12);
  CHECK(r.var_jz == doctest::Approx(2.5));

  std::vector<std::vector<double>> gm{{0.4, 0.115, 0.003}, {0.115, 0.4, 0.115}, {0.003, 0.115, 0.4}};
  auto dk = make_scenario(build_dicke_clusters(1.0, 3, 3, gm, 0.5, 2.0, {true, false, true}));
  REQUIRE(dk.model.modes.size() == 3);
  CHECK(dk.model.modes[0].g == doctest::Approx(0.4));
  CHECK(dk.model.modes[1].detection == Detection::unmonitored);
  // g_k L_k = sum_i g_ik Jx^i
  Mat want = Mat::Zero(64, 64);
  for (int i = 0; i < 3; ++i) want += gm[i][1] * embed(collective_spin(3, 'x'), dk.atom_layout, "c" + std::to_string(i + 1));
  CHECK(maxabs(dk.model.modes[1].g * dk.model.modes[1].L - want) < 1e-14);
  CHECK_THROWS_AS(build_dicke_clusters(1.0, 3, 3, {{0.4, 0.1}}, 0.5, 2.0, {true, true}), ConfigError);
}

TEST_CASE("trajectory determinism and zero coupling") {
  auto cfg = parse_config(minimal_jc());
  auto sc = make_scenario(cfg);
  auto a = run_trajectory(sc, 1), b = run_trajectory(sc, 1), c = run_trajectory(sc, 2);
  CHECK(a.series == b.series);
  CHECK(a.currents == b.currents);
  CHECK(a.series != c.series);
  CHECK(a.t.size() == a.series[0].size());

  auto z = build_jaynes_cummings(1.0, 0.4, 0.0, 1.0, 1.0);
  z.t_final = 1.0;
  z.outputs = {"rho"};
  RunOptions opt;
  opt.keep_states = true;
  // first-order integrator: error shrinks linearly with dt
  std::vector<double> err;
  for (double dt : {1e-3, 1e-4}) {
    z.dt = dt;
    z.record_every = 100;
    auto zs = make_scenario(z);
    auto run = run_trajectory(zs, 0, opt);
    Mat u = expm_hermitian(zs.model.H_A, -I1 * run.t.back());
    err.push_back(maxabs(run.states.back() - u * zs.rho0 * u.adjoint()));
  }
  CHECK(err[1] < 2e-5);
  CHECK(err[0] / err[1] == doctest::Approx(10.0).epsilon(0.1));
}

TEST_CASE("ensemble statistics") {
  auto sc = make_scenario(parse_config(minimal_jc()));
  auto one = run_ensemble(sc, 1, 1);
  auto tr = run_trajectory(sc, 0);
  for (std::size_t c = 0; c < one.columns.size(); ++c) {
    CHECK(one.mean[c] == tr.series[c]);
    for (double s : one.se[c]) CHECK(s == 0.0);
  }
  auto p1 = run_ensemble(sc, 6, 1), p3 = run_ensemble(sc, 6, 3);
  CHECK(p1.mean == p3.mean);
  CHECK(p1.se == p3.se);

  auto un = parse_config(minimal_jc());
  un.modes[0].detection = Detection::unmonitored;
  auto us = make_scenario(un);
  auto ens = run_ensemble(us, 2, 1);
  Engine e(us.model, un.k_max);
  auto st = e.initial_state(us.rho0);
  NoiseStream dummy(0);
  for (std::size_t k = 0; k < un.steps(); ++k) e.step_ito(st, {{cplx(0.0)}}, nullptr, k, un.dt);
  CHECK(maxabs(ens.mean_state.back() - st.rho[0]) < 1e-14);
}

TEST_CASE("feedback master equation") {
  FeedbackConfig fb;
  fb.values = {0.0};
  auto cfg = build_spin_squeezing(1.0, 10, 0.5, 1.0, fb);
  cfg.k_max = 4;
  cfg.t_final = 1.0;
  cfg.dt = 5e-3;
  auto with = feedback_master_equation(make_scenario(cfg));
  auto nofb = cfg;
  nofb.feedback.reset();
  auto without = feedback_master_equation(make_scenario(nofb));
  CHECK(maxabs(with.states.back() - without.states.back()) == 0.0);
  for (double x : with.X) CHECK(std::abs(x) < 1e-12);

  fb.values = {0.3};
  cfg.feedback = fb;
  cfg.t_final = 2.0;
  auto sc = make_scenario(cfg);
  auto constant = feedback_master_equation(sc);
  auto sw = switching_protocol(sc, 0.3, 0.3, 0.5, 1.5);
  CHECK(maxabs(constant.states.back() - sw.states.back()) == 0.0);
  CHECK_THROWS(switching_protocol(sc, 0.3, -0.2, 1.5, 0.5));

  FeedbackConfig dyn;
  dyn.dynamic = true;
  auto dc = build_spin_squeezing(1.0, 10, 0.5, 1.0, dyn);
  CHECK_THROWS(feedback_master_equation(make_scenario(dc)));
}

TEST_CASE("lambda scan helpers") {
  auto g = lambda_grid(-0.6, 0.8, 0.01);
  CHECK(g.size() == 141);
  CHECK(g.front() == -0.6);
  CHECK(g.back() == doctest::Approx(0.8));
  std::vector<ScanPoint> pts;
  const double v[6] = {1.0, 0.95, 0.9, 0.95, 0.8, 0.85};
  for (int i = 0; i < 6; ++i) pts.push_back({-0.2 + 0.1 * i, v[i], 1.0});
  auto m = scan_minima(pts);
  REQUIRE(m.size() == 2);
  CHECK(m[0].lambda == doctest::Approx(0.0).scale(1.0));
  CHECK(m[1].lambda == doctest::Approx(0.2));
}

TEST_CASE("csv and manifest") {
  auto s = csv_table({"t", "x"}, {{0.0, 0.1}, {1.0, 1.0 / 3.0}});
  CHECK(s.rfind("t,x\n", 0) == 0);
  CHECK(s.find("0.33333333333333331") != std::string::npos);
  CHECK(format_double(0.1) == "0.10000000000000001");
}
