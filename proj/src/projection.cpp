#include "regconv/projection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <fmt/format.h>

namespace regconv {

namespace {

constexpr double kExaggeration = 4.0;
constexpr std::size_t kExaggerationIters = 100;
constexpr std::size_t kMomentumSwitch = 250;
constexpr double kInitialMomentum = 0.5;
constexpr double kFinalMomentum = 0.8;
constexpr double kMinGain = 0.01;
constexpr int kBisectionSteps = 30;
constexpr double kEntropyTol = 1e-5;  // bits

// Row distribution for precision exp(log_beta); returns entropy in bits.
double row_distribution(std::span<const double> d, std::size_t self, double dmin, double log_beta,
                        std::span<double> p) {
  const double beta = std::exp(log_beta);
  double sum = 0.0;
  for (std::size_t j = 0; j < d.size(); ++j) {
    p[j] = j == self ? 0.0 : std::exp(-beta * (d[j] - dmin));
    sum += p[j];
  }
  double weighted = 0.0;
  for (std::size_t j = 0; j < d.size(); ++j) {
    p[j] /= sum;
    if (j != self) weighted += p[j] * (d[j] - dmin);
  }
  return (std::log(sum) + beta * weighted) / std::numbers::ln2;
}

}  // namespace

double clamp_perplexity(double requested, std::size_t n) {
  const double limit = (static_cast<double>(n) - 1.0) / 3.0;
  return requested < limit ? requested : std::nextafter(limit, 0.0);
}

Matrix squared_distances(const Matrix& x) {
  const std::size_t n = x.rows();
  Matrix d(n, n);
  parallel_for(n, [&](std::size_t i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      double s = 0.0;
      auto a = x.row(i), b = x.row(j);
      for (std::size_t k = 0; k < a.size(); ++k) {
        double diff = a[k] - b[k];
        s += diff * diff;
      }
      d(i, j) = s;
    }
  });
  return d;
}

Matrix conditional_affinities(const Matrix& sq_dist, double perplexity, std::vector<double>* entropies) {
  const std::size_t n = sq_dist.rows();
  const double target = std::log2(perplexity);
  Matrix p(n, n);
  std::vector<double> h(n, 0.0);
  parallel_for(n, [&](std::size_t i) {
    auto d = sq_dist.row(i);
    auto row = p.row(i);
    double dmin = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) dmin = std::min(dmin, d[j]);

    // Entropy decreases as log_beta grows: bracket the target, then bisect.
    double lo = 0.0, hi = 0.0;
    double ent = row_distribution(d, i, dmin, 0.0, row);
    if (ent > target) {
      for (double step = 1.0; ent > target && hi < 700.0; step *= 2.0) {
        lo = hi;
        hi = std::min(700.0, hi + step);
        ent = row_distribution(d, i, dmin, hi, row);
      }
    } else {
      for (double step = 1.0; ent < target && lo > -700.0; step *= 2.0) {
        hi = lo;
        lo = std::max(-700.0, lo - step);
        ent = row_distribution(d, i, dmin, lo, row);
      }
    }
    double mid = 0.0;
    for (int s = 0; s < kBisectionSteps && std::abs(ent - target) >= kEntropyTol; ++s) {
      mid = 0.5 * (lo + hi);
      ent = row_distribution(d, i, dmin, mid, row);
      (ent > target ? lo : hi) = mid;
    }
    h[i] = ent;
  });
  if (entropies) *entropies = std::move(h);
  return p;
}

Matrix joint_affinities(const Matrix& x, double perplexity) {
  const std::size_t n = x.rows();
  Matrix cond = conditional_affinities(squared_distances(x), perplexity);
  Matrix p(n, n);
  const double denom = 2.0 * static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) p(i, j) = (cond(i, j) + cond(j, i)) / denom;
  return p;
}

namespace {

// Student-t numerators 1 / (1 + |y_i - y_j|^2) and their total Z.
double student_t(const Matrix& y, Matrix& num) {
  const std::size_t n = y.rows();
  num = Matrix(n, n);
  std::vector<double> row_sum(n, 0.0);
  parallel_for(n, [&](std::size_t i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      double dx = y(i, 0) - y(j, 0), dy = y(i, 1) - y(j, 1);
      num(i, j) = 1.0 / (1.0 + dx * dx + dy * dy);
      row_sum[i] += num(i, j);
    }
  });
  double z = 0.0;
  for (double s : row_sum) z += s;
  return z;
}

}  // namespace

double tsne_kl(const Matrix& p, const Matrix& y) {
  Matrix num;
  const double z = student_t(y, num);
  double kl = 0.0;
  for (std::size_t i = 0; i < p.rows(); ++i)
    for (std::size_t j = 0; j < p.cols(); ++j)
      if (i != j && p(i, j) > 0.0) kl += p(i, j) * std::log(p(i, j) / (num(i, j) / z));
  return kl;
}

Matrix tsne_gradient(const Matrix& p, const Matrix& y) {
  const std::size_t n = y.rows();
  Matrix num;
  const double z = student_t(y, num);
  Matrix grad(n, 2);
  parallel_for(n, [&](std::size_t i) {
    double gx = 0.0, gy = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double mult = (p(i, j) - num(i, j) / z) * num(i, j);
      gx += mult * (y(i, 0) - y(j, 0));
      gy += mult * (y(i, 1) - y(j, 1));
    }
    grad(i, 0) = 4.0 * gx;
    grad(i, 1) = 4.0 * gy;
  });
  return grad;
}

Projection2D tsne_project(const EmbeddingMatrix& x, const TsneParams& params) {
  const std::size_t n = x.size();
  if (n < 4) throw DataError(fmt::format("t-SNE needs at least 4 points (got {})", n));
  if (!(params.perplexity >= 1.0) || !(params.perplexity < (static_cast<double>(n) - 1.0) / 3.0))
    throw ConfigError(fmt::format("t-SNE perplexity {} infeasible for n={} (need 1 <= perplexity < {})",
                                  params.perplexity, n, (static_cast<double>(n) - 1.0) / 3.0));
  if (!(params.learning_rate > 0.0)) throw ConfigError("t-SNE learning rate must be positive");

  Matrix p = joint_affinities(x.rows, params.perplexity);
  for (double& v : p.data()) v *= kExaggeration;

  Rng rng(params.seed);
  Matrix y(n, 2);
  for (double& v : y.data()) v = rng.gaussian() * 1e-4;
  Matrix velocity(n, 2);
  Matrix gains(n, 2, 1.0);
  double momentum = kInitialMomentum;

  Projection2D out;
  out.provision_ids = x.provision_ids;
  out.params = params;
  bool exaggerated = true;

  for (std::size_t it = 0; it < params.iterations; ++it) {
    if (it == kExaggerationIters) {
      for (double& v : p.data()) v /= kExaggeration;
      exaggerated = false;
      out.kl_initial = tsne_kl(p, y);
    }
    if (it == kMomentumSwitch) momentum = kFinalMomentum;

    Matrix grad = tsne_gradient(p, y);
    for (std::size_t k = 0; k < grad.data().size(); ++k) {
      double& g = gains.data()[k];
      const double dg = grad.data()[k];
      double& v = velocity.data()[k];
      g = ((dg > 0.0) != (v > 0.0)) ? g + 0.2 : g * 0.8;
      g = std::max(g, kMinGain);
      v = momentum * v - params.learning_rate * g * dg;
      y.data()[k] += v;
    }
    for (std::size_t c = 0; c < 2; ++c) {
      double mean = 0.0;
      for (std::size_t i = 0; i < n; ++i) mean += y(i, c);
      mean /= static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i) y(i, c) -= mean;
    }
  }
  if (exaggerated) {
    for (double& v : p.data()) v /= kExaggeration;
    out.kl_initial = tsne_kl(p, y);
  }
  out.kl_final = tsne_kl(p, y);
  for (double v : y.data())
    if (!std::isfinite(v)) throw NumericError("t-SNE diverged: non-finite coordinates");
  if (!std::isfinite(out.kl_final)) throw NumericError("t-SNE: non-finite KL divergence");
  out.coords = std::move(y);
  return out;
}

namespace {

const char* const kPalette[] = {"#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f",
                                "#edc948", "#b07aa1", "#ff9da7", "#9c755f", "#bab0ac"};

std::string cluster_color(std::size_t c) {
  if (c < std::size(kPalette)) return kPalette[c];
  // Golden-angle hues beyond the fixed palette.
  const double hue = std::fmod(static_cast<double>(c) * 137.508, 360.0);
  return fmt::format("hsl({},65%,50%)", format_fixed(hue, 1));
}

std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

// Marker element for shape index `shape` centered at (x, y).
std::string marker(std::size_t shape, double x, double y, const std::string& fill, const std::string& attrs) {
  const double r = 5.0;
  auto f = [](double v) { return format_fixed(v, 2); };
  switch (shape % 5) {
    case 0:
      return fmt::format(R"(<circle {} cx="{}" cy="{}" r="{}" fill="{}"/>)", attrs, f(x), f(y), f(r), fill);
    case 1:
      return fmt::format(R"(<rect {} x="{}" y="{}" width="{}" height="{}" fill="{}"/>)", attrs, f(x - r),
                         f(y - r), f(2 * r), f(2 * r), fill);
    case 2:
      return fmt::format(R"(<polygon {} points="{},{} {},{} {},{}" fill="{}"/>)", attrs, f(x), f(y - r),
                         f(x - r), f(y + r), f(x + r), f(y + r), fill);
    case 3:
      return fmt::format(R"(<polygon {} points="{},{} {},{} {},{} {},{}" fill="{}" data-shape="diamond"/>)",
                         attrs, f(x), f(y - r), f(x + r), f(y), f(x), f(y + r), f(x - r), f(y), fill);
    default:
      return fmt::format(R"(<path {} d="M{} {}L{} {}M{} {}L{} {}" stroke="{}" stroke-width="2.5"/>)", attrs,
                         f(x - r), f(y - r), f(x + r), f(y + r), f(x - r), f(y + r), f(x + r), f(y - r), fill);
  }
}

}  // namespace

ScatterOutput emit_scatter(const Projection2D& proj, std::span<const std::size_t> assignments,
                           const std::map<std::string, std::string>& corpus_of) {
  const std::size_t n = proj.provision_ids.size();
  if (n == 0) throw DataError("scatter: empty projection");
  if (assignments.size() != n || proj.coords.rows() != n)
    throw DataError("scatter: projection, assignments and ids are not aligned");

  std::vector<std::string> corpora;  // first-appearance order
  std::vector<std::size_t> corpus_index(n);
  std::size_t k = 0;
  for (std::size_t i = 0; i < n; ++i) {
    auto it = corpus_of.find(proj.provision_ids[i]);
    if (it == corpus_of.end())
      throw DataError(fmt::format("scatter: no corpus for provision '{}'", proj.provision_ids[i]));
    auto pos = std::find(corpora.begin(), corpora.end(), it->second);
    if (pos == corpora.end()) pos = corpora.insert(corpora.end(), it->second);
    corpus_index[i] = static_cast<std::size_t>(pos - corpora.begin());
    k = std::max(k, assignments[i] + 1);
  }

  double xmin = proj.coords(0, 0), xmax = xmin, ymin = proj.coords(0, 1), ymax = ymin;
  for (std::size_t i = 0; i < n; ++i) {
    xmin = std::min(xmin, proj.coords(i, 0));
    xmax = std::max(xmax, proj.coords(i, 0));
    ymin = std::min(ymin, proj.coords(i, 1));
    ymax = std::max(ymax, proj.coords(i, 1));
  }
  const double plot = 560.0, margin = 20.0, legend_x = 620.0;
  const double span = std::max({xmax - xmin, ymax - ymin, 1e-12});
  auto sx = [&](double v) { return margin + (v - xmin) / span * plot; };
  auto sy = [&](double v) { return margin + plot - (v - ymin) / span * plot; };

  std::string svg;
  svg += R"(<?xml version="1.0" encoding="UTF-8"?>)" "\n";
  svg += R"(<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="820" height="600" viewBox="0 0 820 600">)" "\n";
  svg += R"(<rect x="0" y="0" width="820" height="600" fill="white"/>)" "\n";
  svg += "<g id=\"points\">\n";
  for (std::size_t i = 0; i < n; ++i) {
    std::string attrs = fmt::format(R"(class="pt" data-id="{}" data-cluster="{}" data-corpus="{}")",
                                    xml_escape(proj.provision_ids[i]), assignments[i],
                                    xml_escape(corpora[corpus_index[i]]));
    svg += marker(corpus_index[i], sx(proj.coords(i, 0)), sy(proj.coords(i, 1)), cluster_color(assignments[i]),
                  attrs);
    svg += '\n';
  }
  svg += "</g>\n<g id=\"legend\" font-family=\"sans-serif\" font-size=\"12\">\n";
  double ly = 30.0;
  svg += fmt::format(R"(<text x="{}" y="{}" font-weight="bold">Cluster</text>)" "\n", legend_x, ly);
  for (std::size_t c = 0; c < k; ++c) {
    ly += 18.0;
    svg += fmt::format(R"(<rect class="legend-cluster" x="{}" y="{}" width="10" height="10" fill="{}"/>)"
                       R"(<text x="{}" y="{}">{}</text>)" "\n",
                       legend_x, format_fixed(ly - 9.0, 2), cluster_color(c), legend_x + 16, format_fixed(ly, 2), c);
  }
  ly += 30.0;
  svg += fmt::format(R"(<text x="{}" y="{}" font-weight="bold">Corpus</text>)" "\n", legend_x, format_fixed(ly, 2));
  for (std::size_t c = 0; c < corpora.size(); ++c) {
    ly += 18.0;
    svg += marker(c, legend_x + 5.0, ly - 4.0, "#444444", R"(class="legend-corpus")");
    svg += fmt::format(R"(<text x="{}" y="{}">{}</text>)" "\n", legend_x + 16, format_fixed(ly, 2),
                       xml_escape(corpora[c]));
  }
  svg += "</g>\n</svg>\n";

  std::string csv = "id,x,y,cluster,corpus\n";
  for (std::size_t i = 0; i < n; ++i)
    csv += fmt::format("{},{},{},{},{}\n", csv_field(proj.provision_ids[i]), format_fixed(proj.coords(i, 0), 6),
                       format_fixed(proj.coords(i, 1), 6), assignments[i], csv_field(corpora[corpus_index[i]]));
  return {std::move(svg), std::move(csv)};
}

}  // namespace regconv
