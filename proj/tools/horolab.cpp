// horolab command-line driver.

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"

#include "horolab/config.hpp"
#include "horolab/lab.hpp"

using namespace horolab;

namespace {

struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) out.push_back(cur);
  return out;
}

double to_real(const std::string& tok, const std::string& whole) {
  try {
    std::size_t used = 0;
    const double v = std::stod(tok, &used);
    if (used == tok.size()) return v;
  } catch (const std::exception&) {
  }
  throw UsageError("cannot parse element '" + whole + "': bad number '" + tok + "'");
}

// e | a:t | b:t | c:t | gen:k | a11,a12,a21,a22
GroupElement parse_element(const std::string& spec, const FuchsianGroup& group, const Tolerances& tol) {
  if (spec == "e") return GroupElement();
  if (const auto c = spec.find(':'); c != std::string::npos) {
    const std::string head = spec.substr(0, c), arg = spec.substr(c + 1);
    if (head == "a") return geo(to_real(arg, spec));
    if (head == "b") return horo(to_real(arg, spec));
    if (head == "c") return unhoro(to_real(arg, spec));
    if (head == "gen") {
      const double k = to_real(arg, spec);
      if (k != std::floor(k) || k < 0 || k >= static_cast<double>(group.generator_count()))
        throw UsageError("cannot parse element '" + spec + "': generator index out of range");
      return group.evaluate({static_cast<std::uint8_t>(2 * k)});
    }
    throw UsageError("cannot parse element '" + spec + "': unknown form '" + head + "'");
  }
  const auto parts = split(spec, ',');
  if (parts.size() != 4) throw UsageError("cannot parse element '" + spec + "': expected e, a:t, b:t, c:t, gen:k or 4 reals");
  return GroupElement(to_real(parts[0], spec), to_real(parts[1], spec), to_real(parts[2], spec), to_real(parts[3], spec), tol);
}

TimeChange parse_time_change(const std::string& spec, FlowKind base, const LabContext& ctx) {
  if (spec == "identity") return TimeChange::identity(base);
  if (spec.rfind("constant:", 0) == 0) return TimeChange::constant(base, to_real(spec.substr(9), spec));
  if (spec == "bump") return TimeChange::bump(base, ctx.space);
  if (spec.rfind("bump:", 0) == 0) return TimeChange::bump(base, ctx.space, to_real(spec.substr(5), spec));
  throw UsageError("unknown time change '" + spec + "' (identity, constant:C, bump, bump:A)");
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << text;
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

std::string fmt(double v, int prec = 12) {
  std::ostringstream os;
  os << std::setprecision(prec) << v;
  return os.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"horolab: geodesic and horocycle flows on compact hyperbolic surfaces"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::string> group_opt;
  std::optional<std::uint64_t> seed_opt;
  app.add_option("--config", config_path, "config file (key = value); default from $HOROLAB_CONFIG");
  app.add_option("--group", group_opt, "group preset or file:<path> (default bolza)");

  // dist
  auto* dist = app.add_subcommand("dist", "distance d_G(x, y), or in the quotient with --quotient");
  bool quotient = false;
  std::string g_spec, h_spec;
  dist->add_flag("--quotient", quotient, "distance between the cosets, with the argmin word");
  dist->add_option("x", g_spec, "e | a:t | b:t | c:t | gen:k | a11,a12,a21,a22")->required();
  dist->add_option("y", h_spec, "same forms as x")->required();

  // sys
  auto* sys = app.add_subcommand("sys", "injectivity radius, trace gap and the min-trace element");

  // config
  auto* cfg = app.add_subcommand("config", "print the effective configuration");

  // test
  auto* test = app.add_subcommand("test", "run an expansiveness test; exit 0 pass, 1 fail, 2 inconclusive");
  std::string which;
  double eps = 0, delta = 0, window = 0, dt = 0.25;
  int pairs = 50, reparams = 10;
  std::string flow_name = "horocycle", direction_name = "positive", tc_spec = "identity", out_path;
  test->add_option("which", which, "bw | sep | kin | kh")->required()->check(CLI::IsMember({"bw", "sep", "kin", "kh"}));
  auto* o_eps = test->add_option("--eps", eps, "orbit tolerance (bw default 0.5, kin default 0.25)");
  auto* o_delta = test->add_option("--delta", delta, "closeness radius (sep default 0.1, kh default 0.05)");
  auto* o_window = test->add_option("--window", window, "time window T (bw 20, sep 30, kin 30, kh 20)");
  test->add_option("--dt", dt, "sampling step")->capture_default_str();
  test->add_option("--pairs", pairs, "on-orbit pairs, or triples for kh")->capture_default_str();
  auto* o_reparams = test->add_option("--reparams", reparams, "reparametrizations per pair (bw)")->capture_default_str();
  auto* o_flow = test->add_option("--flow", flow_name, "geodesic | horocycle | unstable (sep, kin)")->capture_default_str();
  auto* o_dir = test->add_option("--direction", direction_name, "positive | negative (sep, kin)")->capture_default_str();
  auto* o_tc = test->add_option("--tc", tc_spec, "identity | constant:C | bump | bump:A (kin)")->capture_default_str();
  test->add_option("--seed", seed_opt, "sampling seed (default seeds.default)");
  test->add_option("--out", out_path, "verdict file (default verdict_<which>.json)");

  // cex
  auto* cex = app.add_subcommand("cex", "build a counterexample and write witness and certificate files");
  std::string cex_which, cex_prefix;
  double cex_delta = 0.1;
  std::string cex_dir = "positive";
  cex->add_option("which", cex_which, "horocycle-bw | geodesic-sep")
      ->required()
      ->check(CLI::IsMember({"horocycle-bw", "geodesic-sep"}));
  cex->add_option("--delta", cex_delta, "closeness radius")->capture_default_str();
  cex->add_option("--direction", cex_dir, "positive | negative (geodesic-sep)")->capture_default_str();
  cex->add_option("--out", cex_prefix, "output prefix (default cex_<which>)");

  // flow
  auto* flow = app.add_subcommand("flow", "sample an orbit to CSV");
  std::string flow_kind, start_spec, csv_path, flow_tc;
  double t0 = 0, t1 = 1;
  int n = 2;
  flow->add_option("kind", flow_kind, "geodesic | horocycle | unstable")->required();
  flow->add_option("start", start_spec, "starting element")->required();
  flow->add_option("t0", t0)->required();
  flow->add_option("t1", t1)->required();
  flow->add_option("n", n, "number of samples")->required();
  flow->add_option("out", csv_path, "CSV path")->required();
  flow->add_option("--tc", flow_tc, "time change of the flow: identity | constant:C | bump | bump:A");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 3;
  }

  try {
    if (config_path.empty())
      if (const char* env = std::getenv(kConfigEnv)) config_path = env;
    Config config = config_path.empty() ? Config{} : Config::load_file(config_path);
    if (group_opt) config.group_preset = *group_opt;
    if (seed_opt) config.seed = *seed_opt;
    config.validate();

    if (*cfg) {
      std::cout << config.dump();
      return 0;
    }

    const Tolerances tol = config.tolerances();

    if (*dist) {
      const FuchsianGroup group = config.make_group();
      const GroupElement g = parse_element(g_spec, group, tol), h = parse_element(h_spec, group, tol);
      if (!quotient) {
        LeftInvariantMetric metric(config.metric_options());
        std::cout << fmt(metric.distance(g, h)) << '\n';
        return 0;
      }
      auto gp = std::make_shared<const FuchsianGroup>(group);
      auto mp = std::make_shared<const LeftInvariantMetric>(config.metric_options());
      QuotientSpace space(gp, mp, config.seed);
      const auto q = space.quotient_distance({g}, {h});
      // reported word w moves g onto the coset of h: Gamma w g = Gamma h
      std::cout << fmt(q.value) << '\n' << "gamma " << format_word(inverse_word(q.gamma_word)) << '\n';
      return 0;
    }

    if (*flow) {
      const FuchsianGroup group = config.make_group();
      const QuotientPoint x{parse_element(start_spec, group, tol)};
      const FlowKind kind = parse_flow_kind(flow_kind);
      Trajectory tr;
      if (flow_tc.empty()) {
        tr = sample_trajectory(kind, x, t0, t1, n);
      } else {
        const LabContext ctx = LabContext::create(group, config.metric_options(), config.seed);
        tr = sample_trajectory(parse_time_change(flow_tc, kind, ctx), x, t0, t1, n);
      }
      std::ofstream out(csv_path);
      if (!out) throw std::runtime_error("cannot write '" + csv_path + "'");
      write_csv(out, tr);
      std::cout << "wrote " << tr.times.size() << " rows to " << csv_path << '\n';
      return 0;
    }

    const LabContext ctx = LabContext::create(config.make_group(), config.metric_options(), config.seed);

    if (*sys) {
      const auto& s = ctx.space->systole();
      std::cout << "sigma0 " << fmt(s.sigma0) << '\n'
                << "eps_star " << fmt(s.eps_star) << '\n'
                << "min_trace " << fmt(s.min_trace) << '\n'
                << "min_trace_word " << format_word(s.min_trace_word) << '\n'
                << "translation_length " << fmt(s.translation_length) << '\n'
                << "certification_radius " << fmt(s.certification_radius) << '\n'
                << "ball_size " << s.ball_size << '\n';
      return 0;
    }

    if (*test) {
      auto reject = [&](std::initializer_list<std::pair<CLI::Option*, const char*>> opts) {
        for (const auto& [o, name] : opts)
          if (o->count()) throw UsageError(std::string("option ") + name + " does not apply to 'test " + which + "'");
      };
      const std::uint64_t seed = config.seed;
      TestVerdict v;
      if (which == "bw") {
        reject({{o_delta, "--delta"}, {o_flow, "--flow"}, {o_dir, "--direction"}, {o_tc, "--tc"}});
        BwOptions o;
        if (o_eps->count()) o.eps = eps;
        if (o_window->count()) o.window = window;
        o.dt = dt, o.n_pairs = pairs, o.n_reparams = reparams, o.seed = seed;
        v = bw_test_geodesic(ctx, o);
      } else if (which == "sep") {
        reject({{o_eps, "--eps"}, {o_tc, "--tc"}, {o_reparams, "--reparams"}});
        SeparatingOptions o;
        o.flow = parse_flow_kind(flow_name);
        if (o_delta->count()) o.delta = delta;
        if (o_window->count()) o.window = window;
        o.direction = parse_direction(direction_name);
        o.dt = dt, o.n_pairs = pairs, o.seed = seed;
        v = separating_test(ctx, o);
      } else if (which == "kin") {
        reject({{o_delta, "--delta"}, {o_reparams, "--reparams"}});
        const FlowKind base = parse_flow_kind(flow_name);
        if (base == FlowKind::geodesic) throw UsageError("test kin runs on horocycle flows");
        const TimeChange tc = parse_time_change(tc_spec, base, ctx);
        KinematicOptions o;
        if (o_eps->count()) o.eps = eps;
        if (o_window->count()) o.window = window;
        o.direction = parse_direction(direction_name);
        o.dt = dt, o.n_pairs = pairs, o.seed = seed;
        v = kinematic_test_time_change(ctx, tc, o);
      } else {
        reject({{o_eps, "--eps"}, {o_flow, "--flow"}, {o_dir, "--direction"}, {o_tc, "--tc"}, {o_reparams, "--reparams"}});
        KhOptions o;
        if (o_delta->count()) o.delta = delta;
        if (o_window->count()) o.window = window;
        o.dt = dt, o.n_triples = pairs, o.seed = seed;
        v = kh_test_horocycle(ctx, o);
      }
      const std::string path = out_path.empty() ? "verdict_" + which + ".json" : out_path;
      write_file(path, v.to_json());
      std::cout << v.test << ": " << to_string(v.outcome) << "  " << v.summary.dump() << "  -> " << path << '\n';
      return exit_code(v.outcome);
    }

    if (*cex) {
      const std::string prefix = cex_prefix.empty() ? "cex_" + cex_which : cex_prefix;
      TestVerdict v;
      Json witness;
      if (cex_which == "horocycle-bw") {
        const auto c = counterexample_horocycle_not_bw(ctx, cex_delta);
        v = c.verdict;
        witness = {{"x", element_json(c.x_rep)}, {"y", element_json(c.y_rep)}, {"a", c.a}, {"s", c.s.to_json()}};
      } else {
        const auto c = counterexample_geodesic_not_separating(ctx, cex_delta, parse_direction(cex_dir));
        v = c.verdict;
        witness = {{"x", element_json(c.x_rep)}, {"y", element_json(c.y_rep)}, {"s", c.s},
                   {"direction", to_string(c.direction)}};
      }
      write_file(prefix + "_witness.json", witness.dump(2) + "\n");
      write_file(prefix + "_certificate.json", v.to_json());
      std::cout << v.test << ": " << to_string(v.outcome) << "  " << v.summary.dump() << "  -> " << prefix
                << "_{witness,certificate}.json\n";
      return v.outcome == Outcome::pass ? 0 : exit_code(v.outcome);
    }
  } catch (const BudgetExceeded& e) {
    std::cerr << "budget exceeded: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
