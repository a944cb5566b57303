#include <doctest.h>

#include <algorithm>
#include <set>

#include "gplfm/error.hpp"
#include "gplfm/sensor_placement.hpp"
#include "twin.hpp"

using namespace gplfm;

namespace {

struct Setup {
  twin::Twin t;
  Channel target;
  std::vector<double> truth;
  BsspConfig config;
};

const Setup& setup() {
  static const Setup s = [] {
    twin::Options o;
    o.n_dof = 8;
    o.duration = 3.0;
    o.load_dof = 4;
    o.snr_db = 30.0;
    o.accel_dofs = {0, 1, 2, 3, 5, 6, 7};
    o.duplicate_dof = 2;
    Setup out;
    out.t = twin::make(o);
    // identical channel twice
    out.t.sim.measured.channels.back().values = out.t.sim.measured.at("a2").values;
    // the target sensor is virtual: DOF 4, scored against the noise-free response
    out.target = {"a4", Quantity::Acceleration, 4};
    out.truth = twin::row(out.t.sim.acceleration, 4);
    out.config.estimation = twin::estimation_config();
    out.config.min_sensors = 3;
    return out;
  }();
  return s;
}

void check_structure(const BsspResult& r, std::size_t candidates, std::size_t min_sensors) {
  CHECK(r.removal_order.size() == candidates - min_sensors);
  CHECK(r.stopping_cardinality == min_sensors);
  REQUIRE(r.steps.size() == r.removal_order.size() + 1);
  for (std::size_t i = 1; i < r.steps.size(); ++i) {
    const auto& prev = r.steps[i - 1].retained;
    const auto& cur = r.steps[i].retained;
    CHECK(cur.size() + 1 == prev.size());
    for (const auto& n : cur) CHECK(std::find(prev.begin(), prev.end(), n) != prev.end());
    CHECK(std::find(cur.begin(), cur.end(), r.removal_order[i - 1]) == cur.end());
  }
}

}  // namespace

TEST_CASE("backward sequential placement") {
  const Setup& s = setup();
  const BsspResult r = run_bssp(s.t.sim.measured, s.t.modal, s.t.channels, s.target, s.truth, s.config);
  check_structure(r, s.t.channels.size(), 3);
  CHECK(r.failed_evaluations == 0);
  CHECK_FALSE(r.aborted);
  CHECK(r.steps.back().rmse >= r.steps.front().rmse);

  // greedy audit: the chosen removal has the lowest RMSE of its iteration
  for (const auto& it : r.iterations) {
    const auto chosen = std::find_if(it.evaluations.begin(), it.evaluations.end(),
                                     [&](const BsspEvaluation& e) { return e.removed == it.removed; });
    REQUIRE(chosen != it.evaluations.end());
    for (const auto& e : it.evaluations) CHECK(chosen->rmse <= e.rmse);
  }

  // one of the duplicated pair goes first
  const std::set<std::string> pair = {"a2", "a2dup"};
  CHECK(pair.count(r.removal_order.front()) == 1);

  SUBCASE("repeatable") {
    const BsspResult again = run_bssp(s.t.sim.measured, s.t.modal, s.t.channels, s.target, s.truth, s.config);
    CHECK(again.removal_order == r.removal_order);
  }
  SUBCASE("single step equals the exhaustive best single removal") {
    BsspConfig one = s.config;
    one.min_sensors = s.t.channels.size() - 1;
    const BsspResult o = run_bssp(s.t.sim.measured, s.t.modal, s.t.channels, s.target, s.truth, one);
    REQUIRE(o.removal_order.size() == 1);
    const auto& ev = o.iterations.front().evaluations;
    const auto best = std::min_element(ev.begin(), ev.end(),
                                       [](const BsspEvaluation& a, const BsspEvaluation& b) { return a.rmse < b.rmse; });
    CHECK(o.removal_order.front() == best->removed);
    CHECK(o.removal_order.front() == r.removal_order.front());
  }
  SUBCASE("literal highest-RMSE rule") {
    BsspConfig lit = s.config;
    lit.rule = RemovalRule::HighestRmse;
    lit.min_sensors = s.t.channels.size() - 2;
    const BsspResult h = run_bssp(s.t.sim.measured, s.t.modal, s.t.channels, s.target, s.truth, lit);
    for (const auto& it : h.iterations) {
      const auto worst = std::max_element(it.evaluations.begin(), it.evaluations.end(),
                                          [](const BsspEvaluation& a, const BsspEvaluation& b) { return a.rmse < b.rmse; });
      CHECK(it.removed == worst->removed);
    }
  }
}

TEST_CASE("placement against a measured target and input checks") {
  const Setup& s = setup();
  BsspConfig cfg = s.config;
  cfg.min_sensors = s.t.channels.size() - 2;
  const Channel target = s.t.channels[0];
  const BsspResult r = run_bssp(s.t.sim.measured, s.t.modal, s.t.channels, target, std::nullopt, cfg);
  check_structure(r, s.t.channels.size() - 1, cfg.min_sensors);
  for (const auto& step : r.steps) CHECK(std::find(step.retained.begin(), step.retained.end(), "a0") == step.retained.end());

  BsspConfig bad = s.config;
  bad.min_sensors = 0;
  CHECK_THROWS_AS(run_bssp(s.t.sim.measured, s.t.modal, s.t.channels, s.target, s.truth, bad), InvalidInput);
  bad.min_sensors = 20;
  CHECK_THROWS_AS(run_bssp(s.t.sim.measured, s.t.modal, s.t.channels, s.target, s.truth, bad), InvalidInput);
  CHECK_THROWS_AS(run_bssp(s.t.sim.measured, s.t.modal, s.t.channels, s.target, std::nullopt, s.config), InvalidInput);
}
