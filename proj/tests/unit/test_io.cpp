#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <doctest.h>

#include "bmcmc/io.hpp"

using namespace bmcmc;

namespace {

RatingMatrix parse(const std::string& text) {
  std::istringstream in(text);
  return io::parse_counts_csv(in, "counts.csv");
}

CJParameters parse_params(const std::string& text) {
  std::istringstream in(text);
  return io::parse_parameter_file(in, "p.txt");
}

template <typename F>
std::string error_of(F&& f) {
  try {
    f();
  } catch (const io::ParseError& e) {
    return e.what();
  }
  return "";
}

std::filesystem::path scratch_dir() {
  auto dir = std::filesystem::temp_directory_path() / "bmcmc_io_tests";
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("shortest round-trip numbers") {
  CHECK(io::format_double(0.1) == "0.1");
  CHECK(io::format_double(1.0) == "1");
  CHECK(io::format_double(-2.5e-300) == "-2.5e-300");
  const double x = 0.1 + 0.2;
  CHECK(std::stod(io::format_double(x)) == x);
}

TEST_CASE("counts CSV round trip") {
  const RatingMatrix m(2, 3, {5, 3, 2, 1, 1, 8});
  std::ostringstream out;
  io::write_counts_csv(out, m);
  CHECK(out.str() == "stimulus,r1,r2,r3\n1,5,3,2\n2,1,1,8\n");
  CHECK(parse(out.str()) == m);
  CHECK(parse("stimulus, r1 ,r2\r\n1,3,4\r\n\n") == RatingMatrix(1, 2, {3, 4}));
}

TEST_CASE("counts CSV diagnostics carry line numbers") {
  CHECK(error_of([] { parse(""); }) == "counts.csv: empty counts file");
  CHECK(error_of([] { parse("stim,r1,r2\n1,1,1\n"); }).rfind("counts.csv:1:", 0) == 0);
  CHECK(error_of([] { parse("stimulus,r1,r3\n1,1,1\n"); }).rfind("counts.csv:1:", 0) == 0);
  CHECK(error_of([] { parse("stimulus,r1,r2\n1,1\n"); }).rfind("counts.csv:2:", 0) == 0);
  CHECK(error_of([] { parse("stimulus,r1,r2\n1,1,1\n3,1,1\n"); }).rfind("counts.csv:3:", 0) == 0);
  CHECK(error_of([] { parse("stimulus,r1,r2\n1,1,x\n"); }).rfind("counts.csv:2:", 0) == 0);
  CHECK(error_of([] { parse("stimulus,r1,r2\n1,1,-1\n"); }).rfind("counts.csv:2:", 0) == 0);
  CHECK(error_of([] { parse("stimulus,r1,r2\n1,1,1.5\n"); }).rfind("counts.csv:2:", 0) == 0);
  // unequal row totals
  CHECK_FALSE(error_of([] { parse("stimulus,r1,r2\n1,1,1\n2,1,2\n"); }).empty());
  CHECK_FALSE(error_of([] { parse("stimulus,r1,r2\n"); }).empty());
}

TEST_CASE("parameter file round trip") {
  auto p = make_template(ModelVariant::fsdt, 2, 3);
  p.signal_means[1] = 1.25;
  p.criterion_sigmas[2] = 0.1 + 0.2;
  p.free_mask[6] = false;
  std::ostringstream out;
  io::write_parameter_file(out, p);
  const auto back = parse_params(out.str());
  CHECK(back.flatten() == p.flatten());
  CHECK(back.free_mask == p.free_mask);
  CHECK(out.str().rfind("muS[1] 0 fixed\nmuS[2] 1.25 free\n", 0) == 0);
}

TEST_CASE("parameter file defaults and comments") {
  const auto p = parse_params(
      "# two stimuli\n"
      "muS[1] 0 fixed\n"
      "muS[2] 1.5 free   # trailing comment\n"
      "\n"
      "muC[1] 0.5 free\n"
      "sigC[1] 2 free\n");
  CHECK(p.n_stimuli() == 2);
  CHECK(p.n_criteria() == 1);
  CHECK(p.signal_sigmas == std::vector<double>{1.0, 1.0});
  CHECK(p.free_mask == std::vector<bool>{false, true, false, false, true, true});
}

TEST_CASE("parameter file diagnostics") {
  CHECK(error_of([] { parse_params("muS[1] 0 fixed\nmuX[1] 0 free\nmuC[1] 0 free\n"); })
            .rfind("p.txt:2:", 0) == 0);
  CHECK(error_of([] { parse_params("muS[1] 0\nmuC[1] 0 free\n"); }).rfind("p.txt:1:", 0) == 0);
  CHECK(error_of([] { parse_params("muS[1] 0 maybe\nmuC[1] 0 free\n"); }).rfind("p.txt:1:", 0) == 0);
  CHECK(error_of([] { parse_params("muS[1] nan free\nmuC[1] 0 free\n"); }).rfind("p.txt:1:", 0) == 0);
  CHECK(error_of([] { parse_params("muS[1] 0 fixed\nsigS[1] -1 free\nmuC[1] 0 free\n"); })
            .rfind("p.txt:2:", 0) == 0);
  CHECK(error_of([] { parse_params("muS[1] 0 fixed\nmuC[1] 0 free\nmuS[1] 1 free\n"); })
            .find("line 1") != std::string::npos);
  CHECK(error_of([] { parse_params("muS[0] 0 fixed\nmuC[1] 0 free\n"); }).rfind("p.txt:1:", 0) == 0);
  // muS[2] missing
  CHECK_FALSE(error_of([] { parse_params("muS[1] 0 fixed\nmuS[3] 1 free\nmuC[1] 0 free\n"); }).empty());
  CHECK_FALSE(error_of([] { parse_params("muS[1] 0 fixed\n"); }).empty());
}

TEST_CASE("variant adaptation fixes the unused sigma block") {
  const auto p = make_template(ModelVariant::fsdt, 2, 2);
  const auto sdt = io::adapt_to_variant(p, ModelVariant::sdt);
  CHECK(sdt.free_mask == std::vector<bool>{false, true, true, true, true, true, false, false});
  const auto csdt = io::adapt_to_variant(p, ModelVariant::csdt);
  CHECK(csdt.free_mask == std::vector<bool>{false, true, false, false, true, true, true, true});
}

TEST_CASE("samples and trace CSVs") {
  const std::vector<ParameterPoint> s{{{1.0, 2.5}, -3.0}, {{0.5, 2.0}, -2.75}};
  const std::vector<std::string> names{"muS[2]", "sigS[1]"};
  std::ostringstream out;
  io::write_samples_csv(out, s, names);
  CHECK(out.str() == "index,log_density,muS[2],sigS[1]\n0,-3,1,2.5\n1,-2.75,0.5,2\n");

  StepRecord r;
  r.iteration = 7;
  r.log_density = -1.5;
  r.lambda = 0.5;
  r.temperature = 2.0;
  r.accepted = true;
  std::ostringstream t;
  io::write_trace_csv(t, std::vector<StepRecord>{r});
  CHECK(t.str() == "iteration,log_density,lambda,temperature,accepted\n7,-1.5,0.5,2,1\n");
}

TEST_CASE("simulation sidecar") {
  CHECK(io::sidecar_path("out/counts.csv") == std::filesystem::path("out/counts.json"));
  const auto dir = scratch_dir();
  io::SimulationRecord rec;
  rec.variant = ModelVariant::csdt;
  rec.seed = 42;
  rec.trials = 200;
  rec.generating = make_template(ModelVariant::csdt, 2, 3);
  rec.generating.criterion_sigmas[1] = 0.7;
  const auto path = dir / "sim.json";
  io::write_text_file(path, io::simulation_sidecar_json(rec));
  const auto back = io::read_simulation_sidecar(path);
  REQUIRE(back.has_value());
  CHECK(back->variant == ModelVariant::csdt);
  CHECK(back->seed == 42);
  CHECK(back->trials == 200);
  CHECK(back->generating.flatten() == rec.generating.flatten());
  CHECK(back->generating.free_mask == rec.generating.free_mask);

  CHECK_FALSE(io::read_simulation_sidecar(dir / "missing.json").has_value());
  io::write_text_file(dir / "bad.json", "{\"variant\": 3");
  CHECK_THROWS_AS(io::read_simulation_sidecar(dir / "bad.json"), io::ParseError);
  io::write_text_file(dir / "nested/deeper/file.txt", "x");
  CHECK(std::filesystem::exists(dir / "nested/deeper/file.txt"));
}

TEST_CASE("reading files reports the path") {
  const auto dir = scratch_dir();
  {
    std::ofstream f(dir / "c.csv");
    f << "stimulus,r1,r2\n1,1,oops\n";
  }
  const std::string msg = error_of([&] { io::read_counts_csv(dir / "c.csv"); });
  CHECK(msg.find("c.csv:2:") != std::string::npos);
  CHECK_THROWS(io::read_counts_csv(dir / "absent.csv"));
}
