#include "gosr/plots.hpp"

#include <algorithm>
#include <cmath>

#include "gosr/image_io.hpp"

namespace gosr {

namespace {

constexpr int kWidth = 640;
constexpr int kHeight = 400;
constexpr int kMargin = 40;

struct Canvas {
  std::vector<std::uint8_t> rgb;
  Canvas() : rgb(static_cast<std::size_t>(kWidth) * kHeight * 3, 255) {}

  void blend(int x, int y, int r, int g, int b, double alpha) {
    if (x < 0 || x >= kWidth || y < 0 || y >= kHeight) return;
    std::size_t off = (static_cast<std::size_t>(y) * kWidth + static_cast<std::size_t>(x)) * 3;
    rgb[off] = static_cast<std::uint8_t>((1 - alpha) * rgb[off] + alpha * r);
    rgb[off + 1] = static_cast<std::uint8_t>((1 - alpha) * rgb[off + 1] + alpha * g);
    rgb[off + 2] = static_cast<std::uint8_t>((1 - alpha) * rgb[off + 2] + alpha * b);
  }

  void fill_rect(int x0, int y0, int x1, int y1, int r, int g, int b, double alpha) {
    for (int y = y0; y < y1; ++y)
      for (int x = x0; x < x1; ++x) blend(x, y, r, g, b, alpha);
  }
};

double quantile(std::vector<double> sorted, double q) {
  if (sorted.empty()) return 0.0;
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] * (1 - frac) + sorted[hi] * frac;
}

// log axis; gradient magnitudes can be zero, so offset by a tiny floor.
double log_value(double v) { return std::log10(std::max(v, 0.0) + 1e-12); }

}  // namespace

std::vector<int> pick_separated_dims(const FeatureTable& table, int count) {
  if (!table.has_roles()) throw std::invalid_argument("pick_separated_dims: table has no role labels");
  const int width = table.width();
  std::vector<double> sep(static_cast<std::size_t>(width), 0.0);
  for (int d = 0; d < width; ++d) {
    double mk = 0, mu = 0, vk = 0, vu = 0;
    std::size_t nk = 0, nu = 0;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
      const double v = log_value(table.rows[r][static_cast<std::size_t>(d)]);
      if (table.role_labels[r] == 1) {
        mk += v;
        ++nk;
      } else if (table.role_labels[r] == 0) {
        mu += v;
        ++nu;
      }
    }
    if (nk == 0 || nu == 0) throw std::invalid_argument("pick_separated_dims: need rows of both roles");
    mk /= static_cast<double>(nk);
    mu /= static_cast<double>(nu);
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
      const double v = log_value(table.rows[r][static_cast<std::size_t>(d)]);
      if (table.role_labels[r] == 1) vk += (v - mk) * (v - mk);
      else if (table.role_labels[r] == 0) vu += (v - mu) * (v - mu);
    }
    const double pooled = std::sqrt((vk + vu) / static_cast<double>(nk + nu)) + 1e-9;
    sep[static_cast<std::size_t>(d)] = std::abs(mk - mu) / pooled;
  }
  std::vector<int> order(static_cast<std::size_t>(width));
  for (int i = 0; i < width; ++i) order[static_cast<std::size_t>(i)] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return sep[static_cast<std::size_t>(a)] > sep[static_cast<std::size_t>(b)]; });
  order.resize(static_cast<std::size_t>(std::min(count, width)));
  return order;
}

std::vector<std::filesystem::path> plot_gradient_distributions(const FeatureTable& table, std::vector<int> dims,
                                                               const std::filesystem::path& prefix) {
  if (!table.has_roles()) throw std::invalid_argument("plot_gradient_distributions: table has no role labels");
  for (int d : dims)
    if (d < 0 || d >= table.width())
      throw std::invalid_argument("plot_gradient_distributions: dimension " + std::to_string(d) + " out of range 0.." +
                                  std::to_string(table.width() - 1));
  if (dims.empty()) dims = pick_separated_dims(table, 2);

  std::vector<std::filesystem::path> written;
  for (int d : dims) {
    std::vector<double> known, unknown, pooled;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
      const double v = log_value(table.rows[r][static_cast<std::size_t>(d)]);
      if (table.role_labels[r] == 1) known.push_back(v);
      else if (table.role_labels[r] == 0) unknown.push_back(v);
      pooled.push_back(v);
    }
    std::sort(pooled.begin(), pooled.end());
    const double lo = pooled.front(), hi = pooled.back();

    // Freedman-Diaconis binning on the pooled log features.
    const double iqr = quantile(pooled, 0.75) - quantile(pooled, 0.25);
    double bin_w = 2.0 * iqr / std::cbrt(static_cast<double>(pooled.size()));
    int bins;
    if (bin_w <= 0.0 || hi <= lo) bins = 16;
    else bins = std::clamp(static_cast<int>(std::ceil((hi - lo) / bin_w)), 8, 96);
    const double span = hi > lo ? hi - lo : 1.0;

    auto histogram = [&](const std::vector<double>& values) {
      std::vector<double> h(static_cast<std::size_t>(bins), 0.0);
      for (double v : values) {
        int b = static_cast<int>((v - lo) / span * bins);
        b = std::clamp(b, 0, bins - 1);
        h[static_cast<std::size_t>(b)] += 1.0;
      }
      for (auto& x : h) x /= static_cast<double>(std::max<std::size_t>(values.size(), 1));
      return h;
    };
    const auto hk = histogram(known);
    const auto hu = histogram(unknown);
    double peak = 1e-9;
    for (double v : hk) peak = std::max(peak, v);
    for (double v : hu) peak = std::max(peak, v);

    Canvas canvas;
    const int plot_w = kWidth - 2 * kMargin, plot_h = kHeight - 2 * kMargin;
    canvas.fill_rect(kMargin, kHeight - kMargin, kWidth - kMargin, kHeight - kMargin + 2, 40, 40, 40, 1.0);
    canvas.fill_rect(kMargin - 2, kMargin, kMargin, kHeight - kMargin, 40, 40, 40, 1.0);
    for (int b = 0; b < bins; ++b) {
      const int x0 = kMargin + b * plot_w / bins;
      const int x1 = kMargin + (b + 1) * plot_w / bins;
      const int yk = static_cast<int>(hk[static_cast<std::size_t>(b)] / peak * plot_h);
      const int yu = static_cast<int>(hu[static_cast<std::size_t>(b)] / peak * plot_h);
      // known in blue, unknown in red; overlap blends to purple
      canvas.fill_rect(x0, kHeight - kMargin - yk, x1 - 1, kHeight - kMargin, 40, 90, 200, 0.55);
      canvas.fill_rect(x0, kHeight - kMargin - yu, x1 - 1, kHeight - kMargin, 210, 60, 50, 0.55);
    }

    std::filesystem::path out = prefix;
    out += "_f" + std::to_string(d) + ".ppm";
    write_ppm(out, canvas.rgb, kWidth, kHeight);
    written.push_back(out);
  }
  return written;
}

}  // namespace gosr
