#include <catch2/catch_amalgamated.hpp>

#include "gradient/io.hpp"

using namespace gradient;

namespace {

MazeCMDP corridor() {
  return maze_from_layout(MazeLayout::parse("#####\n"
                                            "#..G#\n"
                                            "#####\n"),
                          0.9);
}

}  // namespace

TEST_CASE("distribution CSV round trip") {
  Matrix pts(3, 2);
  pts << 0.5, 1.25, -2.0, 0.0, 3.125, 4.75;
  Vector w(3);
  w << 0.2, 0.3, 0.5;
  std::string csv = io::distribution_csv(pts, w);
  REQUIRE(csv.rfind("x0,x1,weight\n", 0) == 0);

  auto tmp = std::filesystem::temp_directory_path() / "gradient_dist_test.csv";
  io::write_text_file(tmp, csv);
  auto [coords, weights] = io::read_distribution_csv(tmp);
  REQUIRE(coords.rows() == 3);
  REQUIRE(coords.cols() == 2);
  REQUIRE((coords - pts).cwiseAbs().maxCoeff() == 0.0);
  REQUIRE((weights - w).cwiseAbs().maxCoeff() == 0.0);
  std::filesystem::remove(tmp);
}

TEST_CASE("formatting is stable and canonical") {
  REQUIRE(io::format_double(0.0) == "0");
  REQUIRE(io::format_double(-0.0) == "0");
  REQUIRE(io::format_double(0.1) == io::format_double(0.1));
  // Round trip preserves the exact value.
  double v = 1.0 / 3.0;
  REQUIRE(std::stod(io::format_double(v)) == v);
}

TEST_CASE("point mass heatmap has exactly one dark cell") {
  MazeCMDP m = corridor();
  std::string pgm = io::maze_heatmap_pgm(m, Categorical::dirac(m.cmdp.n_contexts, 1));
  REQUIRE(pgm.rfind("P2\n5 3\n255\n", 0) == 0);

  // Parse pixel values.
  std::istringstream in(pgm);
  std::string magic;
  int w, h, maxv;
  in >> magic >> w >> h >> maxv;
  std::vector<int> px(w * h);
  for (int& v : px) in >> v;
  int dark = 0, wall = 0;
  for (int v : px) {
    if (v == 0) ++dark;
    if (v == 128) ++wall;
  }
  REQUIRE(dark == 1);
  REQUIRE(px[1 * 5 + 2] == 0);    // the massed context cell
  REQUIRE(px[1 * 5 + 1] == 255);  // zero-mass free cell is white
  REQUIRE(px[1 * 5 + 3] == 255);  // goal is white
  REQUIRE(wall == 12);
}

TEST_CASE("uniform heatmap shades all free cells equally") {
  MazeCMDP m = corridor();
  std::string pgm = io::maze_heatmap_pgm(m, Categorical::uniform(m.cmdp.n_contexts));
  std::istringstream in(pgm);
  std::string magic;
  int w, h, maxv;
  in >> magic >> w >> h >> maxv;
  std::vector<int> px(w * h);
  for (int& v : px) in >> v;
  REQUIRE(px[1 * 5 + 1] == 0);
  REQUIRE(px[1 * 5 + 2] == 0);

  Categorical wrong = Categorical::uniform(7);
  REQUIRE_THROWS_AS(io::maze_heatmap_pgm(m, wrong), std::invalid_argument);
}

TEST_CASE("curve stage and audit CSV shapes") {
  std::vector<CurvePoint> curve{{1000, -20.0}, {2000, -12.5}};
  std::string c = io::curve_csv(curve);
  REQUIRE(c ==
          "env_steps,eval_return_mean,eval_return_std\n1000,-20,0\n2000,-12.5,0\n");

  CurriculumTrace trace;
  StageRecord s;
  s.alpha = 0.5;
  s.env_steps = 1234;
  s.rounds = 7;
  s.final_G = -14.0;
  s.eval_return = -16.5;
  s.cleared = true;
  trace.stages.push_back(s);
  std::string st = io::stages_csv(trace);
  REQUIRE(st ==
          "stage,alpha,env_steps,rounds,final_G,eval_return,cleared\n"
          "0,0.5,1234,7,-14,-16.5,1\n");

  std::vector<AuditRow> rows{{0.5, 2.0, 0.25}, {1.0, 2.0, 0.5}};
  std::string a = io::audit_csv(rows, 0.5);
  REQUIRE(a.find("m_hat,0.5") != std::string::npos);
  REQUIRE(a.find("0,0.5,0.5,2,0.25\n") != std::string::npos);
}

TEST_CASE("distance table CSV is square") {
  DistanceTable d;
  d.values = Matrix::Zero(2, 2);
  d.values(0, 1) = d.values(1, 0) = 1.5;
  REQUIRE(io::distance_table_csv(d) == "0,1.5\n1.5,0\n");
}

TEST_CASE("manifest hashes are stable and path-sorted") {
  auto dir = std::filesystem::temp_directory_path() / "gradient_manifest_test";
  std::filesystem::create_directories(dir);
  io::write_text_file(dir / "b.csv", "hello\n");
  io::write_text_file(dir / "a.csv", "world\n");
  std::string m1 = io::manifest(dir, {"b.csv", "a.csv"});
  std::string m2 = io::manifest(dir, {"a.csv", "b.csv"});
  REQUIRE(m1 == m2);
  REQUIRE(m1.find("a.csv") < m1.find("b.csv"));
  REQUIRE(io::fnv1a("hello\n") != io::fnv1a("world\n"));
  REQUIRE(io::fnv1a_file(dir / "b.csv") == io::fnv1a("hello\n"));
  std::filesystem::remove_all(dir);
}

TEST_CASE("embedding snapshots serialize") {
  Rng rng(3);
  MLPParams p = MLPParams::init(2, 2, 3, rng);
  std::string csv = io::mlp_params_csv(p);
  REQUIRE(csv.rfind("net,layer,kind,row,col,value\n", 0) == 0);
  // 3 encoder + 3 decoder layers, every parameter listed once.
  size_t lines = std::count(csv.begin(), csv.end(), '\n');
  size_t expect = 1;
  for (const auto* net : {&p.encoder, &p.decoder})
    for (const DenseLayer& l : *net) expect += l.W.size() + l.b.size();
  REQUIRE(lines == expect);

  EmbedTrainReport rep;
  rep.curve.push_back({0.0, 5.0, 4.0, 10.0});
  REQUIRE(io::embed_report_csv(rep) == "epoch,loss,distance_term,recon_term\n0,5,4,10\n");
}
