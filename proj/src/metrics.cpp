#include "reldec/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <iomanip>
#include <map>
#include <ostream>
#include <stdexcept>


namespace reldec {

namespace {

Sentence lowercase(const Sentence& s) {
  Sentence out = s;
  for (auto& tok : out)
    for (auto& ch : tok) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return out;
}

std::map<Sentence, std::size_t> ngram_counts(const Sentence& s, std::size_t n) {
  std::map<Sentence, std::size_t> out;
  for (std::size_t i = 0; i + n <= s.size(); ++i) ++out[Sentence(s.begin() + i, s.begin() + i + n)];
  return out;
}

double mean(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

BleuStats bleu_stats(const std::vector<Sentence>& hypotheses, const std::vector<Sentence>& references) {
  if (hypotheses.size() != references.size()) {
    throw std::invalid_argument("BLEU: " + std::to_string(hypotheses.size()) + " hypotheses but " +
                                std::to_string(references.size()) + " references");
  }
  if (references.empty()) throw std::invalid_argument("BLEU: no references");

  std::array<std::size_t, 4> matched{}, total{};
  BleuStats st;
  for (std::size_t k = 0; k < hypotheses.size(); ++k) {
    const Sentence h = lowercase(hypotheses[k]);
    const Sentence r = lowercase(references[k]);
    st.hyp_length += h.size();
    st.ref_length += r.size();
    for (std::size_t n = 1; n <= 4; ++n) {
      const auto hc = ngram_counts(h, n);
      const auto rc = ngram_counts(r, n);
      for (const auto& [gram, c] : hc) {
        const auto it = rc.find(gram);
        matched[n - 1] += std::min(c, it == rc.end() ? std::size_t{0} : it->second);
        total[n - 1] += c;
      }
    }
  }
  double log_sum = 0.0;
  bool zero = false;
  for (std::size_t n = 0; n < 4; ++n) {
    st.precisions[n] = total[n] ? static_cast<double>(matched[n]) / static_cast<double>(total[n]) : 0.0;
    if (st.precisions[n] == 0.0) zero = true;
    else log_sum += std::log(st.precisions[n]);
  }
  if (st.hyp_length == 0) st.brevity_penalty = 0.0;
  else if (st.hyp_length >= st.ref_length) st.brevity_penalty = 1.0;
  else st.brevity_penalty = std::exp(1.0 - static_cast<double>(st.ref_length) / static_cast<double>(st.hyp_length));
  st.score = zero ? 0.0 : 100.0 * st.brevity_penalty * std::exp(log_sum / 4.0);
  st.score = std::clamp(st.score, 0.0, 100.0);
  return st;
}

double bleu(const std::vector<Sentence>& hypotheses, const std::vector<Sentence>& references) {
  return bleu_stats(hypotheses, references).score;
}

double normalized_discrete_cost(const ObjectiveSpec& spec, std::span<const int> tokens) {
  if (tokens.empty()) throw std::invalid_argument("normalized cost of an empty sequence");
  return discrete_cost(spec, tokens) / static_cast<double>(tokens.size());
}

double normalized_continuous_cost(const ObjectiveSpec& spec, const Tensor& rows) {
  if (rows.rank() != 2 || rows.rows() == 0) throw std::invalid_argument("normalized cost of an empty sequence");
  return relaxed_cost(spec, rows) / static_cast<double>(rows.rows());
}

double diagonal_fraction(std::span<const CostPoint> points, double tol) {
  if (points.empty()) return 0.0;
  std::size_t on = 0;
  for (const auto& p : points)
    if (std::abs(p.continuous - p.discrete) < tol) ++on;
  return static_cast<double>(on) / static_cast<double>(points.size());
}

void write_cost_scatter(std::ostream& os, std::span<const CostPoint> points) {
  os << "sentence,continuous,discrete\n" << std::setprecision(10);
  for (std::size_t i = 0; i < points.size(); ++i) os << i << ',' << points[i].continuous << ',' << points[i].discrete << '\n';
}

double EvalReport::mean_continuous() const { return mean(continuous_costs); }
double EvalReport::mean_discrete() const { return mean(discrete_costs); }

EvalReport make_report(std::string name, const std::vector<Sentence>& hypotheses,
                       const std::vector<Sentence>& references, std::vector<double> continuous,
                       std::vector<double> discrete) {
  EvalReport r;
  r.name = std::move(name);
  r.bleu = bleu(hypotheses, references);
  for (double c : continuous)
    if (!std::isfinite(c)) throw std::domain_error("report " + r.name + " has a non-finite cost");
  for (double c : discrete)
    if (!std::isfinite(c)) throw std::domain_error("report " + r.name + " has a non-finite cost");
  r.continuous_costs = std::move(continuous);
  r.discrete_costs = std::move(discrete);
  std::size_t len = 0;
  for (const auto& h : hypotheses) len += h.size();
  r.average_length = static_cast<double>(len) / static_cast<double>(hypotheses.size());
  return r;
}

void write_report_header(std::ostream& os) { os << "name,bleu,avg_len,mean_continuous_cost,mean_discrete_cost\n"; }

void write_report_row(std::ostream& os, const EvalReport& r) {
  os << std::fixed << std::setprecision(4) << r.name << ',' << r.bleu << ',' << r.average_length << ','
     << r.mean_continuous() << ',' << r.mean_discrete() << '\n';
  os.unsetf(std::ios::floatfield);
}

}  // namespace reldec
