#pragma once

#include <array>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "reldec/data.hpp"
#include "reldec/objective.hpp"

namespace reldec {

struct BleuStats {
  double score = 0.0;                  // [0, 100]
  std::array<double, 4> precisions{};  // modified n-gram precisions
  double brevity_penalty = 0.0;
  std::size_t hyp_length = 0;
  std::size_t ref_length = 0;
};

// Corpus BLEU-4, one reference per sentence, lowercased, no smoothing.
BleuStats bleu_stats(const std::vector<Sentence>& hypotheses, const std::vector<Sentence>& references);
double bleu(const std::vector<Sentence>& hypotheses, const std::vector<Sentence>& references);

// Objective cost divided by the sequence length.
double normalized_discrete_cost(const ObjectiveSpec& spec, std::span<const int> tokens);
double normalized_continuous_cost(const ObjectiveSpec& spec, const Tensor& rows);

struct CostPoint {
  double continuous = 0.0;
  double discrete = 0.0;
};
// Fraction of points with |continuous - discrete| < tol; 0 for no points.
double diagonal_fraction(std::span<const CostPoint> points, double tol = 0.01);
void write_cost_scatter(std::ostream& os, std::span<const CostPoint> points);

struct EvalReport {
  std::string name;
  double bleu = 0.0;
  std::vector<double> continuous_costs;  // per sentence, normalized
  std::vector<double> discrete_costs;    // per sentence, normalized
  double average_length = 0.0;

  double mean_continuous() const;
  double mean_discrete() const;
};

EvalReport make_report(std::string name, const std::vector<Sentence>& hypotheses,
                       const std::vector<Sentence>& references, std::vector<double> continuous,
                       std::vector<double> discrete);

// "name,bleu,avg_len,mean_continuous_cost,mean_discrete_cost" with header.
void write_report_header(std::ostream& os);
void write_report_row(std::ostream& os, const EvalReport& r);

}  // namespace reldec
