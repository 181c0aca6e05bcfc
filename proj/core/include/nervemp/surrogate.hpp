#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

#include "nervemp/cover.hpp"
#include "nervemp/optimize.hpp"
#include "nervemp/quadform.hpp"

namespace nervemp {

// The message on the wire: m evaluations of the sender's message at points
// drawn uniformly from a box over the message variables.
struct SampleSet {
  DirectedEdge edge;
  NodeSet vars;
  Box box;
  MatrixXd inputs;  // m x |vars|
  VectorXd outputs;

  int size() const { return static_cast<int>(outputs.size()); }

  // Text format, byte-stable:
  //   nervemp-samples 1
  //   edge <from> <to>
  //   vars <d> <v...>
  //   lo <d values>
  //   hi <d values>
  //   samples <m>
  //   <x_1 ... x_d y>   (m rows)
  void write(std::ostream& os) const;
  static SampleSet read(std::istream& is);
};

// Draws m points uniformly from `box` (seeded) and evaluates h at each.
// Throws ConfigError for m < 1 or an unbounded box.
SampleSet sample_message(const std::function<double(const VectorXd&)>& h, const NodeSet& vars,
                         const Box& box, int m, std::uint64_t seed, DirectedEdge edge = {});

enum class SurrogateKind { quadratic_ls, one_hidden_layer };

struct FitConfig {
  int hidden = 64;
  int epochs = 2000;
  double learning_rate = 1e-2;
  double momentum = 0.9;
  double ridge = 1e-10;
};

struct TrainingRecord {
  double final_loss = 0.0;  // standardized mean squared error
  int epochs = 0;
  double rmse = 0.0;          // on the training samples, original units
  double max_residual = 0.0;  // idem
};

// Number of monomials of degree <= 2 in `dim` variables.
int quadratic_coefficient_count(int dim);

class Surrogate {
 public:
  SurrogateKind kind() const { return kind_; }
  const NodeSet& vars() const { return vars_; }
  const TrainingRecord& training() const { return training_; }

  double evaluate(const VectorXd& x) const;
  VectorXd gradient(const VectorXd& x) const;

  // The fitted quadratic for quadratic_ls surrogates.
  const std::optional<QuadFunc>& quadratic() const { return quadratic_; }

 private:
  friend Surrogate fit_surrogate(const SampleSet&, SurrogateKind, const FitConfig&, std::uint64_t);

  SurrogateKind kind_ = SurrogateKind::quadratic_ls;
  NodeSet vars_;
  VectorXd in_mean_, in_scale_;
  double out_mean_ = 0.0, out_scale_ = 1.0;
  std::optional<QuadFunc> quadratic_;
  MatrixXd w1_;  // hidden x dim
  VectorXd b1_;
  VectorXd w2_;
  double b2_ = 0.0;
  TrainingRecord training_;
};

// quadratic_ls: least squares over the full degree-2 monomial basis in
// standardized inputs (normal equations, ridge). Throws SingularFit when the
// design is rank deficient.
// one_hidden_layer: ReLU network, Glorot-uniform initialization from `seed`,
// full-batch gradient descent with momentum on standardized data.
Surrogate fit_surrogate(const SampleSet& samples, SurrogateKind kind, const FitConfig& config,
                        std::uint64_t seed);

enum class BoxCenter {
  origin,          // the zero signal
  message_argmin,  // minimizer of the sender's message
};

struct ApproxConfig {
  int samples = 80;
  SurrogateKind kind = SurrogateKind::quadratic_ls;
  double radius = 5.0;
  BoxCenter center = BoxCenter::origin;
  int restarts = 8;
  DescentConfig descent{};
  FitConfig fit{};
  std::uint64_t seed = 0;
  // quadratic_ls only: raise the per-edge sample count to twice the number
  // of quadratic coefficients so the fit is identifiable.
  bool raise_to_identifiable = true;
};

struct EdgeDiagnostics {
  DirectedEdge edge;
  int domain_dim = 0;
  int samples = 0;
  double fit_rmse = 0.0;
  double fit_max_residual = 0.0;
  double final_loss = 0.0;
};

struct ApproxResult {
  double value = 0.0;
  NodeSet vars;
  VectorXd minimizer;
  std::vector<EdgeDiagnostics> edges;
  // Exactly one sample set per tree edge.
  std::vector<SampleSet> transmitted;
  int exchanges = 0;
};

// Message passing where each transmitted message is a SampleSet and the
// receiver works with a fitted surrogate. Throws InnerOptimizationFailed or
// SingularFit from the sampling/fitting steps, ConfigError for an invalid
// configuration.
ApproxResult approx_message_passing(const SubgraphCover& cover, const std::vector<QuadFunc>& quads,
                                    const VectorXd& observations, const DirectedTree& tree,
                                    const ApproxConfig& config);

// Percent: 100 |approx - truth| / max(|truth|, 1e-6).
double error_ratio(double approx_value, double truth_value);

}  // namespace nervemp
