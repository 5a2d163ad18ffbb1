#include "rarhsmm/model.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace rarhsmm {

namespace {

using nlohmann::json;

bool same_vector(const Vector& x, const Vector& y) {
  return x.size() == y.size() && (x.size() == 0 || x == y);
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

class Checker {
 public:
  void add(std::string field, std::ptrdiff_t index, double observed,
           std::string message) {
    result_.violations.push_back(
        {std::move(field), index, observed, std::move(message)});
  }

  // Non-negative finite entries summing to one within kSimplexTolerance.
  void simplex(const std::string& field, const Vector& v) {
    bool entries_ok = true;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      if (!std::isfinite(v[i]) || v[i] < 0.0) {
        add(field, i, v[i], field + " entries must be finite and >= 0");
        entries_ok = false;
      }
    }
    if (!entries_ok) return;
    const double total = v.sum();
    if (std::abs(total - 1.0) > kSimplexTolerance)
      add(field, -1, total, field + " sums to " + fmt(total));
  }

  ValidationResult take() { return std::move(result_); }

 private:
  ValidationResult result_;
};

json vector_to_json(const Vector& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

const json& field(const json& obj, const char* name, const std::string& where) {
  auto it = obj.find(name);
  if (it == obj.end())
    throw ParseError("model document: missing field \"" + std::string(name) +
                     "\"" + where);
  return *it;
}

double number(const json& obj, const char* name, const std::string& where) {
  const json& v = field(obj, name, where);
  if (!v.is_number())
    throw ParseError("model document: field \"" + std::string(name) + "\"" +
                     where + " must be a number");
  return v.get<double>();
}

int integer(const json& obj, const char* name) {
  const json& v = field(obj, name, "");
  if (!v.is_number_integer())
    throw ParseError("model document: field \"" + std::string(name) +
                     "\" must be an integer");
  return v.get<int>();
}

Vector number_array(const json& obj, const char* name,
                    const std::string& where) {
  const json& v = field(obj, name, where);
  if (!v.is_array())
    throw ParseError("model document: field \"" + std::string(name) + "\"" +
                     where + " must be an array");
  Vector out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number())
      throw ParseError("model document: field \"" + std::string(name) + "\"" +
                       where + " has a non-numeric entry at index " +
                       std::to_string(i));
    out[static_cast<Eigen::Index>(i)] = v[i].get<double>();
  }
  return out;
}

}  // namespace

bool operator==(const RegimeParams& x, const RegimeParams& y) {
  return same_vector(x.a, y.a) && x.sigma == y.sigma && x.nu == y.nu &&
         same_vector(x.lambda, y.lambda);
}

bool operator==(const ModelParams& x, const ModelParams& y) {
  return x.K == y.K && x.p == y.p && x.D == y.D &&
         x.sample_rate == y.sample_rate && same_vector(x.pi, y.pi) &&
         x.A.rows() == y.A.rows() && x.A.cols() == y.A.cols() &&
         (x.A.size() == 0 || x.A == y.A) && x.regimes == y.regimes;
}

std::string ValidationResult::summary() const {
  if (ok()) return "ok";
  std::ostringstream os;
  for (const auto& v : violations) {
    os << v.field;
    if (v.index >= 0) os << "[" << v.index << "]";
    os << ": " << v.message << " (observed " << fmt(v.observed) << ")\n";
  }
  return os.str();
}

ValidationResult validate_model(const ModelParams& m) {
  Checker c;
  if (m.K < 1) c.add("K", -1, m.K, "K must be >= 1");
  if (m.p < 0) c.add("p", -1, m.p, "p must be >= 0");
  if (m.D < 1) c.add("D", -1, m.D, "D must be >= 1");
  if (!(std::isfinite(m.sample_rate) && m.sample_rate > 0.0))
    c.add("sample_rate", -1, m.sample_rate, "sample_rate must be > 0");
  if (m.K < 1 || m.p < 0 || m.D < 1) return c.take();

  if (m.pi.size() != m.K)
    c.add("pi", -1, static_cast<double>(m.pi.size()), "pi must have K entries");
  else
    c.simplex("pi", m.pi);

  if (m.A.rows() != m.K || m.A.cols() != m.K) {
    c.add("A", -1, static_cast<double>(m.A.rows()), "A must be K x K");
  } else {
    for (int j = 0; j < m.K; ++j)
      c.simplex("A.row" + std::to_string(j), m.A.row(j).transpose());
  }

  if (static_cast<int>(m.regimes.size()) != m.K) {
    c.add("regimes", -1, static_cast<double>(m.regimes.size()),
          "regimes must have K entries");
    return c.take();
  }
  for (int k = 0; k < m.K; ++k) {
    const auto& r = m.regimes[static_cast<std::size_t>(k)];
    const std::string prefix = "regimes[" + std::to_string(k) + "].";
    if (r.a.size() != m.p) {
      c.add(prefix + "a", -1, static_cast<double>(r.a.size()),
            "a must have p entries");
    } else {
      for (Eigen::Index i = 0; i < r.a.size(); ++i)
        if (!std::isfinite(r.a[i]))
          c.add(prefix + "a", i, r.a[i], "AR weights must be finite");
    }
    if (!(std::isfinite(r.sigma) && r.sigma > 0.0))
      c.add(prefix + "sigma", k, r.sigma, "sigma must be > 0");
    if (!(std::isfinite(r.nu) && r.nu > 0.0))
      c.add(prefix + "nu", k, r.nu, "nu must be > 0");
    if (r.lambda.size() != m.D)
      c.add(prefix + "lambda", -1, static_cast<double>(r.lambda.size()),
            "lambda must have D entries");
    else
      c.simplex(prefix + "lambda", r.lambda);
  }
  return c.take();
}

void require_valid(const ModelParams& params) {
  auto result = validate_model(params);
  if (!result) throw DataError("invalid model:\n" + result.summary());
}

ModelParams renormalized(ModelParams m) {
  m.pi /= m.pi.sum();
  for (Eigen::Index j = 0; j < m.A.rows(); ++j) m.A.row(j) /= m.A.row(j).sum();
  for (auto& r : m.regimes) r.lambda /= r.lambda.sum();
  return m;
}

ValidationResult validate_path(const HiddenPath& path, int K, int D,
                               std::size_t context) {
  Checker c;
  const std::size_t n = path.z.size();
  if (path.d.size() != n) {
    c.add("d", -1, static_cast<double>(path.d.size()),
          "d must have the same length as z");
    return c.take();
  }
  if (path.tau && path.tau->size() != n)
    c.add("tau", -1, static_cast<double>(path.tau->size()),
          "tau must have the same length as z");
  for (std::size_t i = 0; i < n; ++i) {
    const auto idx = static_cast<std::ptrdiff_t>(i);
    if (path.z[i] < 0 || path.z[i] >= K)
      c.add("z", idx, path.z[i], "regime index out of range");
    if (path.d[i] < 1) c.add("d", idx, path.d[i], "counter must be >= 1");
    const bool entry = i == 0 || path.d[i - 1] == 1;
    if (entry && i >= context && path.d[i] > D)
      c.add("d", idx, path.d[i], "entry duration exceeds D");
    if (i + 1 < n && path.d[i] > 1) {
      if (path.z[i + 1] != path.z[i])
        c.add("z", idx + 1, path.z[i + 1],
              "regime changed while the counter was above one");
      if (path.d[i + 1] != path.d[i] - 1)
        c.add("d", idx + 1, path.d[i + 1], "counter did not decrement");
    }
    if (path.tau && i < path.tau->size() && !((*path.tau)[i] > 0.0))
      c.add("tau", idx, (*path.tau)[i], "precision must be > 0");
  }
  return c.take();
}

void validate_sequence(const Sequence& seq, int p) {
  if (seq.samples.size() <= static_cast<std::size_t>(p))
    throw DataError("sequence has " + std::to_string(seq.samples.size()) +
                    " samples; need more than p = " + std::to_string(p));
  for (std::size_t i = 0; i < seq.samples.size(); ++i)
    if (!std::isfinite(seq.samples[i]))
      throw DataError("sequence sample " + std::to_string(i) +
                      " is not finite");
}

std::string serialize_model(const ModelParams& m) {
  json doc;
  doc["format"] = "rarhsmm-model";
  doc["version"] = 1;
  doc["K"] = m.K;
  doc["p"] = m.p;
  doc["D"] = m.D;
  doc["sample_rate"] = m.sample_rate;
  doc["pi"] = vector_to_json(m.pi);
  json rows = json::array();
  for (Eigen::Index j = 0; j < m.A.rows(); ++j)
    rows.push_back(vector_to_json(m.A.row(j).transpose()));
  doc["A"] = rows;
  json regimes = json::array();
  for (const auto& r : m.regimes) {
    regimes.push_back({{"a", vector_to_json(r.a)},
                       {"sigma", r.sigma},
                       {"nu", r.nu},
                       {"lambda", vector_to_json(r.lambda)}});
  }
  doc["regimes"] = regimes;
  return doc.dump(2) + "\n";
}

ModelParams deserialize_model(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("model document: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("model document: expected an object");

  ModelParams m;
  m.K = integer(doc, "K");
  m.p = integer(doc, "p");
  m.D = integer(doc, "D");
  m.sample_rate = number(doc, "sample_rate", "");
  m.pi = number_array(doc, "pi", "");

  const json& rows = field(doc, "A", "");
  if (!rows.is_array())
    throw ParseError("model document: field \"A\" must be an array of rows");
  m.A.resize(static_cast<Eigen::Index>(rows.size()),
             rows.empty() ? 0 : static_cast<Eigen::Index>(rows[0].size()));
  for (std::size_t j = 0; j < rows.size(); ++j) {
    json wrapper = {{"row", rows[j]}};
    Vector row = number_array(wrapper, "row", " (A row " + std::to_string(j) + ")");
    if (row.size() != m.A.cols())
      throw ParseError("model document: field \"A\" rows have unequal lengths");
    m.A.row(static_cast<Eigen::Index>(j)) = row.transpose();
  }

  const json& regimes = field(doc, "regimes", "");
  if (!regimes.is_array())
    throw ParseError("model document: field \"regimes\" must be an array");
  for (std::size_t k = 0; k < regimes.size(); ++k) {
    const std::string where = " (regime " + std::to_string(k) + ")";
    const json& r = regimes[k];
    if (!r.is_object())
      throw ParseError("model document: regime " + std::to_string(k) +
                       " must be an object");
    RegimeParams rp;
    rp.a = number_array(r, "a", where);
    rp.sigma = number(r, "sigma", where);
    rp.nu = number(r, "nu", where);
    rp.lambda = number_array(r, "lambda", where);
    m.regimes.push_back(std::move(rp));
  }
  return m;
}

ModelParams load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open model file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return deserialize_model(buf.str());
}

void save_model(const ModelParams& params, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write model file: " + path);
  out << serialize_model(params);
}

}  // namespace rarhsmm
