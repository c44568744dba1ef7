#include <doctest.h>

#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "fracmin/errors.hpp"
#include "fracmin/report.hpp"
#include "fracmin/runner.hpp"

using namespace fracmin;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("fracmin_runner_" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const {
    return (path / name).string();
  }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::string(std::istreambuf_iterator<char>(in),
                     std::istreambuf_iterator<char>());
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t nl = text.find('\n', start);
    if (nl == std::string::npos) nl = text.size();
    out.push_back(text.substr(start, nl - start));
    start = nl + 1;
  }
  return out;
}

}  // namespace

TEST_CASE("csv emission: RFC 4180 quoting and stable number formatting") {
  CHECK(csv_field("plain") == "plain");
  CHECK(csv_field("") == "");
  CHECK(csv_field("a,b") == "\"a,b\"");
  CHECK(csv_field("say \"hi\"") == "\"say \"\"hi\"\"\"");
  CHECK(csv_field("two\nlines") == "\"two\nlines\"");
  CHECK(csv_line({"a", "b,c", "d"}) == "a,\"b,c\",d\n");
  CHECK(csv_line({}) == "\n");

  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(-3.0) == "-3");
  CHECK(format_double(0.0) == "0");
  // shortest round trip representation survives a parse
  const double pi_ish = 4.1887902047863905;
  CHECK(std::stod(format_double(pi_ish)) == pi_ish);
  CHECK(std::stod(format_double(1e-300)) == 1e-300);
}

TEST_CASE("config hash: reference values and stability") {
  // classic FNV-1a test vectors
  CHECK(fnv1a("") == 14695981039346656037ull);
  CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cull);
  CHECK(fnv1a_hex("").size() == 16);
  CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
}

TEST_CASE("atomic writes: full content lands, bad targets are refused") {
  TempDir tmp;
  const std::string target = tmp.file("a.csv");
  write_file_atomic(target, "one\n");
  CHECK(slurp(target) == "one\n");
  write_file_atomic(target, "two\n");
  CHECK(slurp(target) == "two\n");

  // nested directories are created on demand
  const std::string nested = tmp.file("sub/dir/b.csv");
  write_file_atomic(nested, "x");
  CHECK(slurp(nested) == "x");

  // no temporary files left behind
  int entries = 0;
  for (const auto& entry : fs::directory_iterator(tmp.path)) {
    (void)entry;
    ++entries;
  }
  CHECK(entries == 2);  // a.csv and sub/

  CHECK_THROWS_AS(write_file_atomic(tmp.file(""), "x"), ConfigInvalid);
  // a regular file in the directory position cannot be created into
  CHECK_THROWS_AS(write_file_atomic(tmp.file("a.csv/x.csv"), "x"),
                  ConfigInvalid);
}

TEST_CASE("config parsing: full document, defaults, and strict keys") {
  const ExperimentConfig cfg = parse_config(R"({
    "command": "toda", "n": 2, "s": 0.7,
    "quadrature": {"h": 1e-4, "r_core": 0.2, "r_tail": 2.0, "tol": 1e-9},
    "output": "out.csv", "format": "json", "threads": 4,
    "options": {"resolution": 41, "extent": 1.5, "domain": "disc",
                "robust": true, "sigmas": [0.2, 0.1]}
  })");
  CHECK(cfg.command == "toda");
  CHECK(cfg.params.n == 2);
  CHECK(cfg.params.s == 0.7);
  CHECK(cfg.quadrature.h == 1e-4);
  CHECK(cfg.quadrature.r_core == 0.2);
  CHECK(cfg.quadrature.r_tail == 2.0);
  CHECK(cfg.quadrature.tol == 1e-9);
  CHECK(cfg.output_path == "out.csv");
  CHECK(cfg.format == "json");
  CHECK(cfg.threads == 4);
  CHECK(cfg.options.at("resolution") == "41");
  CHECK(cfg.options.at("extent") == "1.5");
  CHECK(cfg.options.at("domain") == "disc");
  CHECK(cfg.options.at("robust") == "true");
  CHECK(cfg.options.at("sigmas") == "0.2,0.1");

  const ExperimentConfig min = parse_config(R"({"command": "kernel"})");
  CHECK(min.params.n == 3);
  CHECK(min.params.s == 0.5);
  CHECK(min.format == "csv");
  CHECK(min.threads == 0);
  CHECK(min.output_path.empty());

  CHECK_THROWS_AS(parse_config("not json"), ConfigInvalid);
  CHECK_THROWS_AS(parse_config("[1, 2]"), ConfigInvalid);
  CHECK_THROWS_AS(parse_config(R"({"n": 3})"), ConfigInvalid);
  CHECK_THROWS_AS(parse_config(R"({"command": "kernel", "typo": 1})"),
                  ConfigInvalid);
  CHECK_THROWS_AS(parse_config(R"({"command": "kernel", "n": 2.5})"),
                  ConfigInvalid);
  CHECK_THROWS_AS(
      parse_config(R"({"command": "kernel", "quadrature": {"dx": 1}})"),
      ConfigInvalid);
  CHECK_THROWS_AS(
      parse_config(R"({"command": "kernel", "options": {"bad": {"x": 1}}})"),
      ConfigInvalid);
  CHECK_THROWS_AS(
      parse_config(R"({"command": "kernel", "options": {"bad": ["a"]}})"),
      ConfigInvalid);
}

TEST_CASE("canonical form: execution details stay out of the hash") {
  ExperimentConfig a = parse_config(R"({"command": "kernel", "s": 0.5})");
  ExperimentConfig b = a;
  b.threads = 16;
  b.output_path = "elsewhere.csv";
  CHECK(a.canonical() == b.canonical());

  ExperimentConfig c = a;
  c.params.s = 0.8;
  CHECK(a.canonical() != c.canonical());

  ExperimentConfig d = a;
  d.options["zzz"] = "1";
  d.options["aaa"] = "2";
  ExperimentConfig e = a;
  e.options["aaa"] = "2";
  e.options["zzz"] = "1";
  CHECK(d.canonical() == e.canonical());
}

TEST_CASE("config validation: command, format, and pool size gates") {
  ExperimentConfig cfg;
  cfg.command = "kernel";
  CHECK_NOTHROW(cfg.validate());
  cfg.command = "transmogrify";
  CHECK_THROWS_AS(cfg.validate(), ConfigInvalid);
  cfg.command = "kernel";
  cfg.format = "xml";
  CHECK_THROWS_AS(cfg.validate(), ConfigInvalid);
  cfg.format = "json";
  cfg.threads = -1;
  CHECK_THROWS_AS(cfg.validate(), ConfigInvalid);
  cfg.threads = 10000;
  CHECK_THROWS_AS(cfg.validate(), ConfigInvalid);
}

TEST_CASE("kernel run: artifacts in both formats, byte reproducible") {
  TempDir tmp;
  ExperimentConfig cfg = parse_config(R"({"command": "kernel", "s": 0.5})");
  cfg.output_path = tmp.file("k.json");
  cfg.format = "json";
  run(cfg);

  const auto j = nlohmann::json::parse(slurp(cfg.output_path));
  CHECK(j.at("tool") == "fracmin");
  CHECK(j.at("command") == "kernel");
  CHECK(j.at("config_hash").get<std::string>().size() == 16);
  CHECK(j.at("n") == 3);
  const double expected = 2.0 * 3.14159265358979323846 / 1.5;
  CHECK(j.at("c_ns").get<double>() ==
        doctest::Approx(expected).epsilon(1e-12));

  cfg.format = "csv";
  cfg.output_path = tmp.file("k1.csv");
  run(cfg);
  const std::string first = slurp(cfg.output_path);
  cfg.output_path = tmp.file("k2.csv");
  run(cfg);
  CHECK(first == slurp(cfg.output_path));

  const auto rows = lines_of(first);
  REQUIRE(rows.size() == 5);
  CHECK(rows[0].rfind("# fracmin ", 0) == 0);
  CHECK(rows[1] == "# command kernel");
  CHECK(rows[2].rfind("# config_hash ", 0) == 0);
  CHECK(rows[3] ==
        "n,s,sigma,c_ns,c_circ,f_infinity,omega_rel_error");
}

TEST_CASE("toda run: iteration log rows, header kept when nothing iterates") {
  TempDir tmp;
  ExperimentConfig cfg = parse_config(R"({
    "command": "toda",
    "options": {"domain": "interval", "resolution": 21, "profiles": 2}
  })");
  cfg.output_path = tmp.file("log.csv");
  run(cfg);
  const auto rows = lines_of(slurp(cfg.output_path));
  REQUIRE(rows.size() > 4);
  CHECK(rows[3] == "iteration,residual,step_length");
  // Newton residuals drop monotonically on this problem
  double last = 1e300;
  for (std::size_t i = 4; i < rows.size(); ++i) {
    const auto comma = rows[i].find(',');
    const double r = std::stod(rows[i].substr(comma + 1));
    CHECK(r < last);
    last = r;
  }

  // one zero profile: the harmonic seed is already exact, the log is empty,
  // the header still lands
  ExperimentConfig trivial = parse_config(R"({
    "command": "toda",
    "options": {"domain": "interval", "resolution": 21, "profiles": 1}
  })");
  trivial.output_path = tmp.file("empty.csv");
  run(trivial);
  const auto empty_rows = lines_of(slurp(trivial.output_path));
  REQUIRE(empty_rows.size() == 4);
  CHECK(empty_rows[3] == "iteration,residual,step_length");
}

TEST_CASE("run rejects unknown commands, options, and option values") {
  ExperimentConfig cfg;
  cfg.command = "warp";
  CHECK_THROWS_AS(run(cfg), ConfigInvalid);

  cfg.command = "toda";
  cfg.options["domain"] = "klein-bottle";
  CHECK_THROWS_AS(run(cfg), ConfigInvalid);

  cfg.options.clear();
  cfg.options["resolutoin"] = "41";  // typo must fail loudly
  CHECK_THROWS_AS(run(cfg), ConfigInvalid);

  cfg.options.clear();
  cfg.options["resolution"] = "many";
  CHECK_THROWS_AS(run(cfg), ConfigInvalid);

  cfg.options.clear();
  cfg.options["resolution"] = "21.5";
  CHECK_THROWS_AS(run(cfg), ConfigInvalid);
}

TEST_CASE("guarded runs map error families to exit codes") {
  TempDir tmp;
  ExperimentConfig ok = parse_config(R"({"command": "kernel"})");
  ok.output_path = tmp.file("ok.csv");
  CHECK(run_guarded(ok) == 0);
  CHECK(fs::exists(ok.output_path));

  ExperimentConfig bad_format = ok;
  bad_format.format = "yaml";
  CHECK(run_guarded(bad_format) == 2);

  ExperimentConfig bad_s = ok;
  bad_s.params.s = 1.5;  // InvalidParams from the kernel layer
  CHECK(run_guarded(bad_s) == 3);
}
