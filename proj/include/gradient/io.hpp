#pragma once

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>

#include "gradient/curriculum.hpp"
#include "gradient/curriculum_embed.hpp"
#include "gradient/embed.hpp"
#include "gradient/maze.hpp"
#include "gradient/metrics.hpp"

namespace gradient::io {

/// Shortest round-trip decimal formatting, used everywhere so identical runs
/// produce byte-identical artifacts.
inline std::string format_double(double v) {
  std::ostringstream ss;
  ss << std::setprecision(17) << v;
  std::string s = ss.str();
  // Canonicalize the two zero representations.
  if (s == "-0") s = "0";
  return s;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::create_directories(path.parent_path().empty() ? "." : path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_text_file: cannot open " + path.string());
  out << content;
  if (!out) throw std::runtime_error("write_text_file: write failed for " + path.string());
}

/// Distribution CSV: one row per support point, coordinates then weight.
inline std::string distribution_csv(const Matrix& coords, const Vector& weights) {
  if (coords.rows() != weights.size())
    throw std::invalid_argument("distribution_csv: coordinate/weight count mismatch");
  std::ostringstream out;
  for (int j = 0; j < coords.cols(); ++j) out << "x" << j << ",";
  out << "weight\n";
  for (int i = 0; i < coords.rows(); ++i) {
    for (int j = 0; j < coords.cols(); ++j) out << format_double(coords(i, j)) << ",";
    out << format_double(weights[i]) << "\n";
  }
  return out.str();
}

inline std::string distribution_csv(const Particles& p) {
  return distribution_csv(p.points, p.weights);
}

/// Parses a distribution CSV back into (coordinates, weights).
inline std::pair<Matrix, Vector> read_distribution_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_distribution_csv: cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("read_distribution_csv: empty file " + path.string());
  int n_cols = 1 + static_cast<int>(std::count(line.begin(), line.end(), ','));
  if (n_cols < 2)
    throw std::runtime_error("read_distribution_csv: need coordinates and a weight column");
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      // strtod instead of stod: subnormal weights must parse, not raise ERANGE.
      const char* s = cell.c_str();
      char* end = nullptr;
      double v = std::strtod(s, &end);
      if (end == s || *end != '\0')
        throw std::runtime_error("read_distribution_csv: bad number \"" + cell + "\"");
      row.push_back(v);
    }
    if (static_cast<int>(row.size()) != n_cols)
      throw std::runtime_error("read_distribution_csv: ragged row in " + path.string());
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::runtime_error("read_distribution_csv: no data rows");
  Matrix coords(rows.size(), n_cols - 1);
  Vector weights(rows.size());
  for (size_t i = 0; i < rows.size(); ++i) {
    for (int j = 0; j < n_cols - 1; ++j) coords(i, j) = rows[i][j];
    weights[i] = rows[i][n_cols - 1];
  }
  return {std::move(coords), std::move(weights)};
}

/// Square distance table as a plain n x n CSV.
inline std::string distance_table_csv(const DistanceTable& d) {
  std::ostringstream out;
  for (int i = 0; i < d.size(); ++i) {
    for (int j = 0; j < d.size(); ++j) {
      if (j) out << ",";
      out << format_double(d.values(i, j));
    }
    out << "\n";
  }
  return out.str();
}

/// Learning curve CSV: environment steps and mean/std of the evaluation return.
inline std::string curve_csv(const std::vector<CurvePoint>& curve) {
  std::ostringstream out;
  out << "env_steps,eval_return_mean,eval_return_std\n";
  for (const CurvePoint& p : curve)
    out << p.env_steps << "," << format_double(p.eval_return) << ",0\n";
  return out.str();
}

/// Per-stage summary CSV for a completed run.
inline std::string stages_csv(const CurriculumTrace& trace) {
  std::ostringstream out;
  out << "stage,alpha,env_steps,rounds,final_G,eval_return,cleared\n";
  for (size_t k = 0; k < trace.stages.size(); ++k) {
    const StageRecord& s = trace.stages[k];
    out << k << "," << format_double(s.alpha) << "," << s.env_steps << "," << s.rounds << ","
        << format_double(s.final_G) << "," << format_double(s.eval_return) << ","
        << (s.cleared ? 1 : 0) << "\n";
  }
  return out.str();
}

/// Per-stage summary CSV for an embedding-assisted run, with the fallback and
/// reward-model bookkeeping columns.
inline std::string embed_stages_csv(const EmbedCurriculumTrace& trace) {
  std::ostringstream out;
  out << "stage,alpha,env_steps,rounds,final_G,eval_return,cleared,used_fallback,model_samples\n";
  for (size_t k = 0; k < trace.stages.size(); ++k) {
    const EmbedStageRecord& s = trace.stages[k];
    out << k << "," << format_double(s.alpha) << "," << s.env_steps << "," << s.rounds << ","
        << format_double(s.final_G) << "," << format_double(s.eval_return) << ","
        << (s.cleared ? 1 : 0) << "," << (s.used_fallback ? 1 : 0) << "," << s.model_samples
        << "\n";
  }
  return out.str();
}

/// Transfer audit CSV: per-transition gap, transport distance, and ratio.
inline std::string audit_csv(const std::vector<AuditRow>& rows, double delta_alpha) {
  std::ostringstream out;
  out << "k,alpha_next,gap,w,ratio\n";
  double m_hat = 0.0;
  for (size_t k = 0; k < rows.size(); ++k) {
    out << k << "," << format_double(std::min(1.0, (k + 1) * delta_alpha)) << ","
        << format_double(rows[k].gap) << "," << format_double(rows[k].w) << ","
        << format_double(rows[k].ratio) << "\n";
    m_hat = std::max(m_hat, rows[k].ratio);
  }
  out << "m_hat," << format_double(m_hat) << ",,,\n";
  return out.str();
}

/// 8-bit grayscale PGM of a context distribution on the maze: probability maps
/// linearly to darkness, walls render mid-gray, the goal cell white.
inline std::string maze_heatmap_pgm(const MazeCMDP& m, const Categorical& rho) {
  if (rho.size() != m.cmdp.n_contexts)
    throw std::invalid_argument("maze_heatmap_pgm: distribution/context size mismatch");
  const MazeLayout& lay = m.layout;
  double pmax = rho.weights.maxCoeff();
  std::ostringstream out;
  out << "P2\n" << lay.width << " " << lay.height << "\n255\n";
  // Map flat cell -> context index.
  std::vector<int> cell_context(lay.cells.size(), -1);
  for (int c = 0; c < m.cmdp.n_contexts; ++c)
    cell_context[m.state_cell[m.cmdp.initial_state(c)]] = c;
  for (int r = 0; r < lay.height; ++r) {
    for (int col = 0; col < lay.width; ++col) {
      int v = 128;  // wall
      int cell = r * lay.width + col;
      if (lay.at(r, col) == Cell::Goal && cell_context[cell] < 0) {
        v = 255;
      } else if (lay.at(r, col) != Cell::Wall) {
        double p = cell_context[cell] >= 0 ? rho.weights[cell_context[cell]] : 0.0;
        v = pmax > 0.0 ? 255 - static_cast<int>(std::lround(255.0 * p / pmax)) : 255;
      }
      out << v << (col + 1 == lay.width ? "" : " ");
    }
    out << "\n";
  }
  return out.str();
}

/// Flat layer-tagged CSV of an embedding parameter snapshot.
inline std::string mlp_params_csv(const MLPParams& p) {
  std::ostringstream out;
  out << "net,layer,kind,row,col,value\n";
  auto dump = [&out](const char* net, const std::vector<DenseLayer>& layers) {
    for (size_t l = 0; l < layers.size(); ++l) {
      for (int i = 0; i < layers[l].W.rows(); ++i)
        for (int j = 0; j < layers[l].W.cols(); ++j)
          out << net << "," << l << ",W," << i << "," << j << ","
              << format_double(layers[l].W(i, j)) << "\n";
      for (int i = 0; i < layers[l].b.size(); ++i)
        out << net << "," << l << ",b," << i << ",0," << format_double(layers[l].b[i]) << "\n";
    }
  };
  dump("encoder", p.encoder);
  dump("decoder", p.decoder);
  return out.str();
}

/// Embedding training report CSV: per-epoch loss decomposition.
inline std::string embed_report_csv(const EmbedTrainReport& rep) {
  std::ostringstream out;
  out << "epoch,loss,distance_term,recon_term\n";
  for (const auto& row : rep.curve)
    out << static_cast<long>(row[0]) << "," << format_double(row[1]) << ","
        << format_double(row[2]) << "," << format_double(row[3]) << "\n";
  return out.str();
}

/// FNV-1a 64-bit content hash, used for the artifact manifest.
inline std::uint64_t fnv1a(const std::string& data) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::uint64_t fnv1a_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("fnv1a_file: cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return fnv1a(ss.str());
}

/// Manifest: one "hash  relative-path" line per artifact, sorted by path.
inline std::string manifest(const std::filesystem::path& root,
                            std::vector<std::filesystem::path> files) {
  std::sort(files.begin(), files.end());
  std::ostringstream out;
  for (const auto& f : files) {
    std::ostringstream hex;
    hex << std::hex << std::setfill('0') << std::setw(16) << fnv1a_file(root / f);
    out << hex.str() << "  " << f.generic_string() << "\n";
  }
  return out.str();
}

}  // namespace gradient::io
