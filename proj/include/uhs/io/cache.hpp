#pragma once

#include "uhs/io/records.hpp"
#include "uhs/symbols/integrating_factor.hpp"

#include <cstdlib>

namespace uhs::io {

/// Cache root: UHS_CACHE_DIR when set, else <output>/cache.
inline fs::path cache_dir(const std::string& output) {
  if (const char* env = std::getenv("UHS_CACHE_DIR"); env != nullptr && *env != '\0') return env;
  return fs::path(output) / "cache";
}

/// Key of a symbol table set: model, grid, truncation radius and factor options.
inline std::string symbol_cache_key(const CoefficientModel& model, const Grid& g, double radius,
                                    const IntegratingFactorOptions& opt) {
  json j = {{"model", model.canonical()},    {"n", g.dim()},       {"M", g.points()},
            {"L", g.half_width()},           {"R", radius},        {"variant", to_string(opt.variant)},
            {"s", opt.s},                    {"ray_tol", opt.ray_tol}, {"tail_rel", opt.tail_rel}};
  return config_hash(j);
}

/// File layout: magic "UHSSYM\0\0", version u32, n u32, M u32, pad u32, L f64, key (16 hex
/// chars), then the p^R and p_e^R tables as complex<float>, row-major (x, xi).
inline std::string symbol_cache_bytes(const SymbolTable& p, const SymbolTable& pe, const std::string& key) {
  std::string out(48, '\0');
  const std::uint32_t version = 1, n = p.grid.dim(), m = p.grid.points(), pad = 0;
  const double l = p.grid.half_width();
  std::memcpy(out.data(), "UHSSYM\0\0", 8);
  std::memcpy(out.data() + 8, &version, 4);
  std::memcpy(out.data() + 12, &n, 4);
  std::memcpy(out.data() + 16, &m, 4);
  std::memcpy(out.data() + 20, &pad, 4);
  std::memcpy(out.data() + 24, &l, 8);
  std::memcpy(out.data() + 32, key.data(), std::min<std::size_t>(16, key.size()));
  for (const SymbolTable* t : {&p, &pe}) {
    std::vector<std::complex<float>> v(t->values.begin(), t->values.end());
    out.append(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(std::complex<float>));
  }
  return out;
}

inline std::pair<std::shared_ptr<SymbolTable>, std::shared_ptr<SymbolTable>> read_symbol_cache(
    const std::string& bytes, const Grid& g, const std::string& key) {
  if (bytes.size() < 48 || bytes.compare(0, 6, "UHSSYM") != 0) throw std::runtime_error("cache: bad magic");
  std::uint32_t version, n, m;
  double l;
  std::memcpy(&version, bytes.data() + 8, 4);
  std::memcpy(&n, bytes.data() + 12, 4);
  std::memcpy(&m, bytes.data() + 16, 4);
  std::memcpy(&l, bytes.data() + 24, 8);
  if (version != 1) throw std::runtime_error("cache: unsupported version");
  if (static_cast<int>(n) != g.dim() || static_cast<int>(m) != g.points() || l != g.half_width())
    throw std::runtime_error("cache: grid mismatch");
  if (bytes.compare(32, 16, key.substr(0, 16)) != 0) throw std::runtime_error("cache: key mismatch");
  const std::size_t count = g.size() * g.size();
  if (bytes.size() != 48 + 2 * count * sizeof(std::complex<float>)) throw std::runtime_error("cache: truncated");
  auto load = [&](std::size_t offset) {
    std::vector<std::complex<float>> v(count);
    std::memcpy(v.data(), bytes.data() + offset, count * sizeof(std::complex<float>));
    auto t = std::make_shared<SymbolTable>(g);
    for (std::size_t i = 0; i < count; ++i) t->values[i] = Complex(v[i]);
    return t;
  };
  return {load(48), load(48 + count * sizeof(std::complex<float>))};
}

struct CachedFactor {
  IntegratingFactor factor;
  fs::path path;
  bool built = false;  ///< false when loaded from disk
};

/// Loads the factor tables from the cache, building and storing them on a miss.
inline CachedFactor cached_integrating_factor(const CoefficientModel& model, const Grid& g, double radius,
                                              const IntegratingFactorOptions& opt, const fs::path& dir,
                                              bool build_on_miss = true) {
  const auto op = truncate(model, radius, g);
  // Zero b1 gives constant symbols; nothing to store.
  if (opt.variant == B1Variant::order_zero && model.b1_zero()) return {integrating_factor(op, opt, &g), {}, false};
  const std::string key = symbol_cache_key(model, g, radius, opt);
  const fs::path path = dir / ("symbols_" + key + ".uhssym");
  if (fs::exists(path)) {
    auto [p, pe] = read_symbol_cache(read_file(path), g, key);
    return {integrating_factor_from_tables(op, opt, p, pe), path, false};
  }
  if (!build_on_miss) throw ConfigError("cache: no symbol tables at " + path.string() + "; run `uhs cache build`");
  IntegratingFactor f = integrating_factor(op, opt, &g);
  if (!f.p_R.is_multiplier()) atomic_write(path, symbol_cache_bytes(*f.p_R.table(), *f.p_e_R.table(), key));
  return {std::move(f), path, true};
}

}  // namespace uhs::io
