// Copyright 2026 The nist-desk Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <sys/wait.h>

#ifndef NIST_BINARY
#error "NIST_BINARY must point at the nist executable"
#endif

namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string output;
};

Run nist_cmd(const std::string& args) {
  const fs::path log = fs::temp_directory_path() / "nist_cli_test.log";
  const std::string cmd = std::string(NIST_BINARY) + " " + args + " >" + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(log);
  r.output.assign(std::istreambuf_iterator<char>(in), {});
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

const fs::path& scratch() {
  static const fs::path d = [] {
    const fs::path p = fs::temp_directory_path() / "nist_cli_scratch";
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return d;
}

} // namespace

TEST_CASE("usage errors exit with 2") {
  CHECK(nist_cmd("").code == 2);
  CHECK(nist_cmd("frobnicate").code == 2);
  CHECK(nist_cmd("gen --frames 2").code == 2);
  CHECK(nist_cmd("train --data x").code == 2);
  const Run bad_key = nist_cmd("gen --out " + (scratch() / "k").string() + " --set no_such_key=1");
  CHECK(bad_key.code == 2);
  CHECK(bad_key.output.find("no_such_key") != std::string::npos);
}

TEST_CASE("pipeline errors exit with 1 and name the path") {
  const std::string missing = (scratch() / "no_such_dataset").string();
  const Run r = nist_cmd("train --data " + missing + " --out " + (scratch() / "r").string() + " --steps 1");
  CHECK(r.code == 1);
  CHECK(r.output.find("no_such_dataset") != std::string::npos);
}

TEST_CASE("gen writes frame directories and a manifest") {
  const fs::path d = scratch() / "gen_layout";
  REQUIRE(nist_cmd("gen --scene icosphere1 --frames 4 --res 64x64 --tess-level 4 --seed 7 --out " + d.string()).code == 0);
  CHECK(fs::exists(d / "manifest.txt"));
  int frames = 0;
  for (const auto& e : fs::directory_iterator(d)) frames += e.is_directory() ? 1 : 0;
  CHECK(frames == 4);
}

TEST_CASE("gen is deterministic") {
  const fs::path a = scratch() / "gen_a", b = scratch() / "gen_b";
  const std::string common = " --scene icosphere1 --frames 2 --res 32x32 --tess-level 3 --seed 4";
  REQUIRE(nist_cmd("gen --out " + a.string() + common).code == 0);
  REQUIRE(nist_cmd("gen --out " + b.string() + common).code == 0);
  for (const char* f : {"color.pfm", "label.pfm", "gnormal.pfm", "snormal.pfm", "depth.pfm"}) {
    CHECK(slurp(a / "frame_00001" / f) == slurp(b / "frame_00001" / f));
  }
}

TEST_CASE("infer rejects frames that break divisibility") {
  const fs::path data = scratch() / "odd", run = scratch() / "odd_run";
  REQUIRE(nist_cmd("gen --out " + data.string() + " --frames 1 --res 36x36 --tess-level 2").code == 0);
  REQUIRE(nist_cmd("train --data " + data.string() + " --out " + run.string() +
                   " --steps 0 --set channels=4 --set crop=32")
              .code == 0);
  const Run r = nist_cmd("infer --checkpoint " + (run / "final.ckpt").string() + " --frame " +
                         (data / "frame_00000").string() + " --out " + (scratch() / "pred").string());
  CHECK(r.code == 1);
  CHECK(r.output.find("divisib") != std::string::npos);
}

TEST_CASE("infer and eval on a valid frame") {
  const fs::path data = scratch() / "even", run = scratch() / "even_run";
  REQUIRE(nist_cmd("gen --out " + data.string() + " --frames 2 --res 32x32 --tess-level 2").code == 0);
  REQUIRE(nist_cmd("train --data " + data.string() + " --out " + run.string() +
                   " --steps 1 --set channels=4 --set crop=32")
              .code == 0);
  CHECK(nist_cmd("infer --checkpoint " + (run / "final.ckpt").string() + " --frame " +
                 (data / "frame_00000").string() + " --out " + (scratch() / "pred").string())
            .code == 0);
  CHECK(fs::exists(scratch() / "pred" / "pred.pfm"));
  CHECK(fs::exists(scratch() / "pred" / "pred.png"));

  const fs::path oracle = scratch() / "oracle";
  REQUIRE(nist_cmd("eval --oracle-label --data " + data.string() + " --out " + oracle.string()).code == 0);
  const std::string csv = slurp(oracle / "report.csv");
  const auto mean = csv.find("\nmean,");
  REQUIRE(mean != std::string::npos);
  const std::string row = csv.substr(mean + 1, csv.find('\n', mean + 1) - mean - 1);
  CHECK(row.substr(row.rfind(',') + 1) == "0");
  CHECK(nist_cmd("eval --data " + data.string() + " --out " + oracle.string()).code == 2);
}

TEST_CASE("selftest exit status") {
  CHECK(nist_cmd("selftest").code == 0);
  const Run faulty = nist_cmd("selftest --inject-conv-fault 0.01");
  CHECK(faulty.code == 1);
  CHECK(faulty.output.find("FAIL grad conv2d") != std::string::npos);
}
