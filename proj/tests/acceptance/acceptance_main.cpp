// Runs every acceptance criterion at its stated tolerance and prints one
// PASS/FAIL line per criterion. Exits nonzero if any criterion fails.

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "edge_grpo/advantage.hpp"
#include "edge_grpo/analytics.hpp"
#include "edge_grpo/entropy.hpp"
#include "edge_grpo/gec.hpp"
#include "edge_grpo/runner.hpp"
#include "edge_grpo/trainer.hpp"
#include "gradcheck.hpp"
#include "support.hpp"

#ifndef EDGE_GRPO_CONFIG_DIR
#error "EDGE_GRPO_CONFIG_DIR must name the shipped configs directory"
#endif

namespace edge_grpo {
namespace {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
  bool pass = true;
  std::string detail;
};

void fail(Outcome& o, const std::string& why) {
  if (o.pass) o.detail.clear();
  o.pass = false;
  o.detail += (o.detail.empty() ? "" : "; ") + why;
}

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

TrainConfig load(const std::string& name) {
  const json j = read_config_json(std::string(EDGE_GRPO_CONFIG_DIR) + "/" + name);
  TrainConfig c = resolve_config(j, {}, std::nullopt);
  c.metrics_path.clear();
  c.record_wall_time = false;
  return c;
}

// ---- 1: formula oracles ---------------------------------------------------

double mean_of(const std::vector<double>& x) {
  long double s = 0;
  for (double v : x) s += v;
  return static_cast<double>(s / x.size());
}

std::vector<double> oracle_group_advantages(const std::vector<double>& r) {
  const double m = mean_of(r);
  long double ss = 0;
  for (double v : r) ss += (v - m) * (v - m);
  const double sd = std::sqrt(static_cast<double>(ss / r.size()));
  const bool same = std::all_of(r.begin(), r.end(), [&](double v) { return v == r[0]; });
  std::vector<double> out;
  for (double v : r) out.push_back(same ? 0.0 : (v - m) / sd);
  return out;
}

std::vector<double> oracle_scaled(const std::vector<double>& p) {
  const double m = mean_of(p);
  std::vector<double> out;
  for (double v : p) out.push_back(m <= kEntropyMeanGuard ? 1.0 : v / m);
  return out;
}

// Entropy of softmax(z) as logsumexp(z) - sum p z.
double oracle_entropy_from_logits(const std::vector<std::vector<double>>& logits) {
  long double total = 0;
  for (const auto& z : logits) {
    const double mx = *std::max_element(z.begin(), z.end());
    long double se = 0;
    for (double v : z) se += std::exp(static_cast<long double>(v - mx));
    const long double lse = mx + std::log(se);
    long double pz = 0;
    for (double v : z) pz += std::exp(static_cast<long double>(v) - lse) * v;
    total += lse - pz;
  }
  return static_cast<double>(total / logits.size());
}

double oracle_rcm(const std::vector<EntropyRecord>& recs) {
  long double sc = 0, sw = 0, sa = 0;
  int nc = 0, nw = 0;
  for (const auto& r : recs) {
    (r.correct ? sc : sw) += r.entropy;
    (r.correct ? nc : nw) += 1;
    sa += r.entropy;
  }
  return static_cast<double>((sc / nc - sw / nw) / (sa / recs.size()));
}

Outcome criterion_oracles() {
  Outcome o;
  const auto start = Clock::now();
  std::mt19937_64 gen(1);
  std::uniform_int_distribution<int> size(2, 16);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double worst = 0.0, worst_softmax = 0.0;
  auto track = [](double& w, double a, double b) { w = std::max(w, std::abs(a - b)); };

  for (int t = 0; t < 1000; ++t) {
    const int g = size(gen);
    std::vector<double> rewards(static_cast<std::size_t>(g));
    for (double& r : rewards) {
      // Mix binary, graded and fully tied groups.
      r = t % 3 == 0 ? static_cast<double>(gen() % 2) : t % 3 == 1 ? unit(gen) * 3 - 1 : 0.25;
    }
    const auto got = group_advantages(rewards);
    const auto want = oracle_group_advantages(rewards);
    for (std::size_t i = 0; i < want.size(); ++i) track(worst, got.base[i], want[i]);
  }
  for (int t = 0; t < 1000; ++t) {
    std::vector<double> p(static_cast<std::size_t>(size(gen)));
    for (double& v : p) v = t % 50 == 0 ? unit(gen) * 1e-9 : unit(gen) * 4;
    const auto got = scaled_entropies(p).values;
    const auto want = oracle_scaled(p);
    for (std::size_t i = 0; i < want.size(); ++i) track(worst, got[i], want[i]);
  }
  for (int t = 0; t < 1000; ++t) {
    const std::size_t g = static_cast<std::size_t>(size(gen));
    std::vector<double> a(g), s(g);
    for (std::size_t i = 0; i < g; ++i) {
      a[i] = unit(gen) * 4 - 2;
      s[i] = 0.05 + unit(gen) * 3;
    }
    const auto got = entropy_driven_advantages(a, s);
    for (std::size_t i = 0; i < g; ++i) track(worst, got[i], a[i] / s[i]);
  }
  for (int t = 0; t < 1000; ++t) {
    const int vocab = 2 + static_cast<int>(gen() % 60);
    const int len = 1 + static_cast<int>(gen() % 10);
    std::normal_distribution<double> n(0.0, 0.5 + unit(gen) * 4);
    std::vector<std::vector<double>> logits(static_cast<std::size_t>(len));
    DistributionSeq dists;
    for (auto& z : logits) {
      z.resize(static_cast<std::size_t>(vocab));
      for (double& v : z) v = n(gen);
      dists.push_back(softmax(z, 1.0));
    }
    track(worst_softmax, response_entropy(dists), oracle_entropy_from_logits(logits));
  }
  for (int t = 0; t < 1000; ++t) {
    const int n = 2 + static_cast<int>(gen() % 200);
    std::vector<EntropyRecord> recs(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      recs[static_cast<std::size_t>(i)].correct = i == 0 ? true : i == 1 ? false : gen() % 2;
      recs[static_cast<std::size_t>(i)].entropy = 0.01 + unit(gen) * 3;
    }
    track(worst, rcm(recs), oracle_rcm(recs));
  }

  const double secs = seconds_since(start);
  o.detail = "max abs err " + fmt("%.3g", worst) + ", softmax-derived " + fmt("%.3g", worst_softmax) +
             ", " + fmt("%.2f", secs) + " s";
  if (worst > 1e-9) fail(o, "exact error " + fmt("%.3g", worst) + " > 1e-9");
  if (worst_softmax > 1e-6) fail(o, "softmax error " + fmt("%.3g", worst_softmax) + " > 1e-6");
  if (secs >= 10) fail(o, "took " + fmt("%.1f", secs) + " s");
  return o;
}

// ---- 2: gradient fidelity -------------------------------------------------

Outcome criterion_gradients() {
  Outcome o;
  const auto start = Clock::now();
  std::mt19937_64 gen(2024);
  gradcheck::Stats stats;
  for (int i = 0; i < 100; ++i) {
    auto inst = gradcheck::random_instance(gen, i);
    if (i % 5 == 4) inst.kl_beta = 0.1;
    stats.add(gradcheck::check(inst));
  }
  const double secs = seconds_since(start);
  o.detail = "max rel err " + fmt("%.3g", stats.max_rel_error) + " over " +
             std::to_string(stats.entries) + " entries, clipped tokens " +
             std::to_string(stats.clipped_tokens) + ", unclipped " +
             std::to_string(stats.unclipped_tokens) + ", " + fmt("%.2f", secs) + " s";
  if (!(stats.max_rel_error < 1e-4)) fail(o, "relative error " + fmt("%.3g", stats.max_rel_error));
  if (stats.clipped_tokens == 0 || stats.unclipped_tokens == 0) fail(o, "a clip regime was not covered");
  if (secs >= 60) fail(o, "took " + fmt("%.1f", secs) + " s");
  return o;
}

// ---- 3: GEC distribution --------------------------------------------------

Outcome criterion_gec() {
  Outcome o;
  const GecConfig c;
  Rng rng(3);
  int counts[3] = {0, 0, 0};
  const int n = 10000;
  for (int i = 0; i < n; ++i) ++counts[static_cast<int>(sample_action(c, rng))];
  const double want[3] = {0.5, 0.25, 0.25};
  std::string freqs;
  for (int k = 0; k < 3; ++k) {
    const double f = counts[k] / static_cast<double>(n);
    freqs += (k ? "/" : "") + fmt("%.4f", f);
    if (std::abs(f - want[k]) > 0.02) fail(o, "action " + std::to_string(k) + " frequency " + fmt("%.4f", f));
  }

  // An always-wrong policy makes every group all-incorrect before correction.
  const QuestionInstance q = testing::add_question(3, 4);
  const PolicyParams policy = testing::fixed_answer_policy(10, 5);
  TrainConfig config;
  config.mode = TrainMode::kEdge;
  config.group_size = 8;
  const Rng base(33);
  int all_wrong = 0, not_all_wrong_before = 0;
  for (int i = 0; i < n; ++i) {
    Rng r = base.child({static_cast<std::uint64_t>(i)});
    const GroupRollout g = rollout_group(policy, q, config, r);
    if (!g.all_incorrect_before_correction) ++not_all_wrong_before;
    if (std::all_of(g.rewards.begin(), g.rewards.end(), [](double x) { return x == 0.0; })) ++all_wrong;
  }
  const double p = std::pow(0.5, 8);
  const double bound = p + 3 * std::sqrt(p * (1 - p) / n);
  const double rate = all_wrong / static_cast<double>(n);
  o.detail = "frequencies " + freqs + ", all-incorrect rate " + fmt("%.4f", rate) + " (bound " +
             fmt("%.4f", bound) + ")";
  if (not_all_wrong_before) fail(o, "simulated groups were not all wrong before correction");
  if (rate > bound) fail(o, "all-incorrect rate " + fmt("%.4f", rate) + " > " + fmt("%.4f", bound));
  return o;
}

// ---- 4: collapse diagnostic -----------------------------------------------

Outcome criterion_collapse() {
  Outcome o;
  std::string detail;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    TrainConfig c = load("hard.json");
    c.seed = seed;
    c.mode = TrainMode::kEdge;
    const double edge = train(c).mean_advantage_variance;
    c.mode = TrainMode::kVanilla;
    const double vanilla = train(c).mean_advantage_variance;
    detail += (seed > 1 ? ", " : "") + std::string("seed ") + std::to_string(seed) + " edge " +
              fmt("%.4f", edge) + " vs vanilla " + fmt("%.4f", vanilla);
    if (!(edge > vanilla)) fail(o, "seed " + std::to_string(seed) + " edge did not exceed vanilla");
  }
  if (o.pass) o.detail = detail;
  return o;
}

// ---- 5: ablation direction ------------------------------------------------

double uniform_success_rate(const TaskSpec& spec, int max_len, int n) {
  const PolicyParams uniform(Vocab(spec.modulus).size(), 2);
  Rng rng(55);
  int ok = 0;
  for (int i = 0; i < n; ++i) {
    const QuestionInstance q = generate_question(spec, rng);
    const SampledResponse s = sample_response(uniform, q.prompt, 1.0, max_len, rng);
    if (verify(q, s.tokens).correct) ++ok;
  }
  return ok / static_cast<double>(n);
}

Outcome criterion_ablation() {
  Outcome o;
  const TrainConfig mix = load("mix.json");
  const TaskSpec& hard = mix.tasks.entries.back().spec;
  const double uniform = uniform_success_rate(hard, mix.max_len, 20000);
  if (!(uniform < 0.05)) fail(o, "uniform-policy success on the hard part " + fmt("%.4f", uniform));

  const auto start = Clock::now();
  const TrainMode modes[] = {TrainMode::kVanilla, TrainMode::kForceR, TrainMode::kForceREda,
                             TrainMode::kEdge};
  double means[4] = {0, 0, 0, 0};
  for (int m = 0; m < 4; ++m) {
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      TrainConfig c = mix;
      c.mode = modes[m];
      c.seed = seed;
      means[m] += train(c).final_eval_accuracy / 3.0;
    }
  }
  const double secs = seconds_since(start);
  std::string detail = "uniform hard success " + fmt("%.4f", uniform) + ";";
  for (int m = 0; m < 4; ++m) {
    detail += " " + std::string(mode_name(modes[m])) + " " + fmt("%.3f", means[m]);
  }
  detail += "; " + fmt("%.1f", secs) + " s";
  o.detail = detail;
  if (!(means[3] >= means[0] + 0.05)) fail(o, "edge mean " + fmt("%.3f", means[3]) + " < vanilla + 0.05");
  if (secs >= 600) fail(o, "took " + fmt("%.1f", secs) + " s");
  if (!o.pass) o.detail = detail + "; " + o.detail;
  return o;
}

// ---- 6: learnability floor ------------------------------------------------

Outcome criterion_learnability() {
  Outcome o;
  std::string detail;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    TrainConfig c = load("easy.json");
    c.seed = seed;
    c.mode = TrainMode::kEdge;
    c.steps = TrainConfig{}.steps;
    const double acc = train(c).final_eval_accuracy;
    detail += (seed > 1 ? ", " : "") + std::string("seed ") + std::to_string(seed) + " " + fmt("%.3f", acc);
    if (!(acc >= 0.9)) fail(o, "seed " + std::to_string(seed) + " reached " + fmt("%.3f", acc));
  }
  if (o.pass) o.detail = detail;
  return o;
}

// ---- 7: reflection tooling ------------------------------------------------

Outcome criterion_reflection() {
  Outcome o;
  const std::vector<std::string> keywords = {
      "check again", "recheck",     "double-check", "rethink",      "think again",
      "reevaluate",  "re-evaluate", "re-examine",   "verify again", "reevaluation",
      "reexamine",   "reanalyze",   "reassess",     "reconsider",   "go over"};
  if (kReflectionKeywords.size() != keywords.size()) fail(o, "keyword count differs");
  for (const auto& k : keywords) {
    std::string upper = k;
    for (char& ch : upper) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
    if (!detect_reflection("Wait, " + k + ".") || !detect_reflection(upper)) fail(o, "missed '" + k + "'");
  }
  const std::vector<std::string> negatives = {
      "",          "The answer is 7.", "check the result", "again and again", "re check",
      "double check", "think it over", "verify the sum again", "re evaluate", "reexam",
      "go-over",   "goover",           "re-think",         "reasses",         "reanalyse",
      "I will consider it", "we check, again", "re-examin", "checkagain", "thinkagain"};
  for (const auto& n : negatives) {
    if (detect_reflection(n)) fail(o, "false positive '" + n + "'");
  }

  // Correct: 100 at 1.3 and 400 at 0.675 (mean 0.8). Wrong: 200 at 0.9 and
  // 300 at 1.4 (mean 1.2). Pooled mean 1.0, so RCM = -0.4; 100 of 500 correct
  // sit above the mean and 200 of 500 wrong below it.
  const auto dir = testing::fresh_dir("acceptance_rcm");
  const auto path = dir / "corpus.jsonl";
  {
    std::ofstream out(path);
    int id = 0;
    auto emit = [&](int count, bool correct, double entropy) {
      for (int i = 0; i < count; ++i, ++id) {
        out << json{{"id", id},
                    {"question_text", "q" + std::to_string(id % 37)},
                    {"response_text", id % 5 == 0 ? "let me recheck" : "answer"},
                    {"correct", correct},
                    {"entropy", entropy},
                    {"temperature", 0.6},
                    {"model_tag", "planted"}}
                   .dump()
            << '\n';
      }
    };
    emit(100, true, 1.3);
    emit(400, true, 0.675);
    emit(200, false, 0.9);
    emit(300, false, 1.4);
  }
  const AnalysisReport report = analyze_log(path);
  if (report.buckets.size() != 1 || !report.buckets[0].rcm || !report.buckets[0].calibration) {
    fail(o, "expected one bucket with rcm and calibration");
    return o;
  }
  const double got = *report.buckets[0].rcm;
  const CalibrationStats& cal = *report.buckets[0].calibration;
  o.detail = "15 keywords, 20 negatives; RCM " + fmt("%.12f", got) + ", fractions " +
             fmt("%.4f", cal.frac_correct_above_mean) + "/" + fmt("%.4f", cal.frac_incorrect_below_mean);
  if (report.accuracy.total != 1000) fail(o, "parsed " + std::to_string(report.accuracy.total) + " records");
  if (std::abs(got + 0.4) > 1e-9) fail(o, "RCM " + fmt("%.12f", got));
  if (cal.frac_correct_above_mean != 0.2 || cal.frac_incorrect_below_mean != 0.4) {
    fail(o, "calibration fractions " + fmt("%.6f", cal.frac_correct_above_mean) + "/" +
                fmt("%.6f", cal.frac_incorrect_below_mean));
  }
  return o;
}

// ---- 8: determinism -------------------------------------------------------

std::string strip_wall_time(const std::string& text) {
  std::string out;
  for (const auto& line : testing::lines_of(text)) {
    json j = json::parse(line);
    j.erase("wall_ms");
    out += j.dump() + '\n';
  }
  return out;
}

Outcome criterion_determinism() {
  Outcome o;
  const auto dir = testing::fresh_dir("acceptance_determinism");
  TrainConfig c = load("mix.json");
  c.steps = 200;
  c.eval_every = 50;
  c.record_wall_time = true;
  c.metrics_path = (dir / "a.jsonl").string();
  train(c);
  c.metrics_path = (dir / "b.jsonl").string();
  train(c);
  const std::string a = strip_wall_time(testing::slurp(dir / "a.jsonl"));
  const std::string b = strip_wall_time(testing::slurp(dir / "b.jsonl"));
  o.detail = std::to_string(testing::lines_of(a).size()) + " lines, " + std::to_string(a.size()) + " bytes";
  if (a.empty() || a != b) fail(o, "metrics differ between identical runs");
  return o;
}

}  // namespace
}  // namespace edge_grpo

int main() {
  using namespace edge_grpo;
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"1 formula oracles", criterion_oracles},
      {"2 gradient fidelity", criterion_gradients},
      {"3 GEC distribution", criterion_gec},
      {"4 collapse diagnostic", criterion_collapse},
      {"5 ablation direction", criterion_ablation},
      {"6 learnability floor", criterion_learnability},
      {"7 reflection tooling", criterion_reflection},
      {"8 determinism", criterion_determinism},
  };
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    if (!o.pass) ++failed;
    std::printf("[%s] %s: %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
