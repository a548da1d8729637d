#include "cli/plotdata.hpp"

#include <openssl/evp.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "andikit/trajgen.hpp"
#include "cli/run_config.hpp"

namespace andikit::cli {
namespace {

void require(bool ok, const std::string& type, const std::string& what) {
  if (!ok) throw std::runtime_error(type + " report: " + what);
}

bool is_numeric_array(const Json& j, std::size_t n) {
  if (!j.is_array() || (n && j.size() != n)) return false;
  for (const auto& v : j) {
    if (!v.is_number() && !v.is_null()) return false;
  }
  return true;
}

std::string num(const Json& v) {
  if (v.is_null()) return "nan";
  return format_double(v.get<double>());
}

std::string class_header() {
  std::string s;
  for (auto m : traj::kAllMechanisms) s += "," + std::string(traj::to_string(m));
  return s;
}

}  // namespace

void write_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp);
    out << content;
    out.flush();
    if (!out) throw std::runtime_error("write failed for " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingInput("cannot open " + path);
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    if (in.gcount() > 0) EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  static const char* hex = "0123456789abcdef";
  std::string s;
  for (unsigned i = 0; i < len; ++i) {
    s += hex[md[i] >> 4];
    s += hex[md[i] & 15];
  }
  return s;
}

void validate_report(const Json& r) {
  if (!r.is_object() || !r.contains("type") || !r["type"].is_string()) {
    throw std::runtime_error("report has no type");
  }
  const std::string type = r["type"];
  if (type == "erasure") {
    require(is_numeric_array(r.value("decile_accuracy", Json()), 10), type, "decile_accuracy must have 10 entries");
    require(r.contains("random_accuracy") && r["random_accuracy"].is_number(), type, "random_accuracy missing");
    require(r.contains("baseline_accuracy") && r["baseline_accuracy"].is_number(), type, "baseline_accuracy missing");
    require(r.value("samples", 0) > 0, type, "no samples");
  } else if (type == "noise") {
    require(r.contains("schemes") && r["schemes"].is_array() && !r["schemes"].empty(), type, "no schemes");
    for (const auto& s : r["schemes"]) {
      require(s.contains("scheme") && s["scheme"].is_string(), type, "scheme name missing");
      require(s.contains("levels") && s["levels"].is_array() && !s["levels"].empty(), type, "scheme without levels");
      for (const auto& l : s["levels"]) {
        require(l.contains("noise") && l.contains("mean") && l.contains("std_error") &&
                    is_numeric_array(l.value("accuracies", Json()), 0),
                type, "malformed level");
      }
    }
  } else if (type == "correlation") {
    require(r.contains("r") && r["r"].is_array() && r["r"].size() == traj::kNumClasses, type, "r must have 8 rows");
    for (const auto& row : r["r"]) require(is_numeric_array(row, 4), type, "r rows must have 4 entries");
    require(is_numeric_array(r.value("windows", Json()), traj::kNumClasses), type, "windows must have 8 entries");
    std::size_t total = 0;
    for (const auto& w : r["windows"]) total += w.get<std::size_t>();
    require(total > 0, type, "no windows");
  } else if (type == "evaluation") {
    require(r.value("samples", 0) > 0, type, "no samples");
    require(r.contains("accuracy") && r["accuracy"].is_number(), type, "accuracy missing");
    require(r.contains("confusion") && r["confusion"].is_array() && r["confusion"].size() == traj::kNumClasses, type,
            "confusion must be 8x8");
    for (const auto& row : r["confusion"]) require(is_numeric_array(row, traj::kNumClasses), type, "confusion row");
    require(r.contains("confidence") && r["confidence"].is_array(), type, "confidence missing");
  } else if (type == "training") {
    require(r.contains("history") && r["history"].is_array() && !r["history"].empty(), type, "empty history");
  } else if (type == "receptive_field") {
    require(r.value("nodes", 0) > 0, type, "no nodes");
    for (const char* k : {"peak", "span_start", "span_end"}) {
      require(is_numeric_array(r.value(k, Json()), r["nodes"].get<std::size_t>()), type, std::string(k) + " shape");
    }
  } else if (type == "gradcam" || type == "augmentation" || type == "activations" || type == "dataset") {
    require(r.value("samples", 0) > 0, type, "no samples");
  } else {
    throw std::runtime_error("unknown report type '" + type + "'");
  }
}

std::vector<std::pair<std::string, std::string>> render_plotdata(const Json& r) {
  validate_report(r);
  const std::string type = r["type"];
  std::vector<std::pair<std::string, std::string>> files;
  if (type == "erasure") {
    std::string s = "series,decile,accuracy\n";
    for (std::size_t d = 0; d < 10; ++d) s += "decile," + std::to_string(d + 1) + "," + num(r["decile_accuracy"][d]) + "\n";
    s += "random,," + num(r["random_accuracy"]) + "\n";
    files.emplace_back("erasure.csv", s);
  } else if (type == "noise") {
    std::string s = "scheme,noise,mean_accuracy,std_error,replicates\n";
    for (const auto& sc : r["schemes"]) {
      for (const auto& l : sc["levels"]) {
        s += sc["scheme"].get<std::string>() + "," + num(l["noise"]) + "," + num(l["mean"]) + "," +
             num(l["std_error"]) + "," + std::to_string(l["accuracies"].size()) + "\n";
      }
    }
    files.emplace_back("noise.csv", s);
  } else if (type == "correlation") {
    std::string s = "class,AC,CS,SG,VD,windows\n";
    for (std::size_t c = 0; c < traj::kNumClasses; ++c) {
      s += std::string(traj::to_string(traj::mechanism_at(c)));
      for (std::size_t k = 0; k < 4; ++k) s += "," + num(r["r"][c][k]);
      s += "," + std::to_string(r["windows"][c].get<std::size_t>()) + "\n";
    }
    files.emplace_back("correlation.csv", s);
  } else if (type == "evaluation") {
    std::string s = "true" + class_header() + "\n";
    for (std::size_t c = 0; c < traj::kNumClasses; ++c) {
      s += std::string(traj::to_string(traj::mechanism_at(c)));
      for (std::size_t k = 0; k < traj::kNumClasses; ++k) s += "," + num(r["confusion"][c][k]);
      s += "\n";
    }
    files.emplace_back("confusion.csv", s);
    std::string a = "true_class,alpha_lo,alpha_hi,count" + class_header() + "\n";
    for (const auto& b : r["confidence"]) {
      a += b["true_class"].get<std::string>() + "," + num(b["lo"]) + "," + num(b["hi"]) + "," +
           std::to_string(b["count"].get<std::size_t>());
      for (const auto& p : b["mean_probs"]) a += "," + num(p);
      a += "\n";
    }
    files.emplace_back("confidence_alpha.csv", a);
  } else if (type == "training") {
    std::string s = "epoch,lr,train_loss,train_accuracy,val_loss,val_accuracy\n";
    for (const auto& e : r["history"]) {
      s += std::to_string(e["epoch"].get<std::size_t>()) + "," + num(e["lr"]) + "," + num(e["train_loss"]) + "," +
           num(e["train_accuracy"]) + "," + num(e["val_loss"]) + "," + num(e["val_accuracy"]) + "\n";
    }
    files.emplace_back("history.csv", s);
  } else if (type == "receptive_field") {
    std::string s = "node,peak,span_start,span_end\n";
    for (std::size_t j = 0; j < r["nodes"].get<std::size_t>(); ++j) {
      s += std::to_string(j) + "," + num(r["peak"][j]) + "," + num(r["span_start"][j]) + "," + num(r["span_end"][j]) +
           "\n";
    }
    files.emplace_back("receptive_field.csv", s);
  } else {
    throw std::runtime_error("no plot data for report type '" + type + "'");
  }
  return files;
}

std::vector<std::string> emit_plotdata(const Json& report, const std::string& dir) {
  const auto files = render_plotdata(report);
  std::vector<std::string> written;
  for (const auto& [name, content] : files) {
    const auto path = (std::filesystem::path(dir) / name).string();
    write_atomic(path, content);
    written.push_back(path);
  }
  return written;
}

}  // namespace andikit::cli
