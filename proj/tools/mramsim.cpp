// mramsim: command-line driver for characterization, t_W sweeps, image
// read-back experiments and error-map reports.
//
// Exit codes: 0 success, 1 domain error, 2 usage or I/O error.

#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include "CLI11.hpp"

#include "mramsim/allocator.hpp"
#include "mramsim/calibration.hpp"
#include "mramsim/characterization.hpp"
#include "mramsim/device.hpp"
#include "mramsim/pattern.hpp"
#include "mramsim/power.hpp"
#include "mramsim/quality.hpp"
#include "mramsim/serialize.hpp"

namespace fs = std::filesystem;
using namespace mramsim;

namespace {

struct Settings {
  std::string profile = "C1";
  std::string profile_path;
  std::uint64_t seed = 1;
  std::vector<double> tw = {5.0};
  unsigned n = 50;
  std::string pattern = "solid:0000";
  std::string eval_pattern;
  double temp = kReferenceTemperatureC;
  double field = 0.0;
  std::string init = "ones";
  std::string select = "none";
  std::string out = ".";
  unsigned workers = 1;
  std::string image;
  std::string packing = "one";
  std::string curve;
  double t_full = 20.0;
};

// Options the user gave explicitly on the command line override the config
// file, which overrides MRAMSIM_SEED and the built-in defaults.
class Overlay {
 public:
  explicit Overlay(CLI::App* app) : app_(app) {}

  template <typename T>
  void bind(const std::string& flag, const std::string& key, T& target, const std::string& help) {
    auto holder = std::make_shared<T>(target);
    auto* opt = app_->add_option(flag, *holder, help);
    entries_.push_back({opt, key, [holder, &target] { target = *holder; },
                        [&target, key](const Json& j) { assign(target, key, j); }});
  }

  void apply(const std::optional<Json>& config) {
    if (config) {
      for (const auto& [key, value] : config->items()) {
        bool known = false;
        for (const auto& e : entries_) {
          if (e.key != key) continue;
          e.from_json(value);
          known = true;
        }
        if (!known) throw IoError("config key '" + key + "' is not an option of this command");
      }
    }
    for (const auto& e : entries_)
      if (e.option->count() > 0) e.from_cli();
  }

 private:
  template <typename T>
  static void assign(T& target, const std::string& key, const Json& j) {
    try {
      if constexpr (std::is_same_v<T, std::vector<double>>) {
        target = j.is_array() ? j.get<std::vector<double>>() : std::vector<double>{j.get<double>()};
      } else {
        target = j.get<T>();
      }
    } catch (const Json::exception&) {
      throw IoError("config key '" + key + "' has the wrong type");
    }
  }

  struct Entry {
    CLI::Option* option;
    std::string key;
    std::function<void()> from_cli;
    std::function<void(const Json&)> from_json;
  };

  CLI::App* app_;
  std::vector<Entry> entries_;
};

struct Command {
  CLI::App* app = nullptr;
  std::unique_ptr<Overlay> overlay;
  std::string config_path;
};

Command add_command(CLI::App& root, const std::string& name, const std::string& help, Settings& s) {
  Command c;
  c.app = root.add_subcommand(name, help);
  c.overlay = std::make_unique<Overlay>(c.app);
  c.app->add_option("--config", c.config_path, "JSON file with option defaults")->check(CLI::ExistingFile);
  c.overlay->bind("--profile", "profile", s.profile, "reference chip C1..C5");
  c.overlay->bind("--profile-path", "profile_path", s.profile_path, "chip profile JSON (overrides --profile)");
  c.overlay->bind("--seed", "seed", s.seed, "master seed (default $MRAMSIM_SEED or 1)");
  c.overlay->bind("--temp", "temp", s.temp, "temperature in C");
  c.overlay->bind("--field", "field", s.field, "external magnetic field in mT");
  c.overlay->bind("--out", "out", s.out, "output directory");
  c.overlay->bind("--workers", "workers", s.workers, "threads for measurement rounds");
  return c;
}

void finish_settings(Command& c, Settings& s) {
  std::optional<Json> config;
  if (!c.config_path.empty()) config = parse_json(read_text_file(c.config_path), "config '" + c.config_path + "'");
  if (const char* env = std::getenv("MRAMSIM_SEED")) {
    try {
      std::size_t used = 0;
      s.seed = std::stoull(env, &used);
      if (used != std::string(env).size()) throw std::invalid_argument(env);
    } catch (const std::logic_error&) {
      throw IoError(std::string("MRAMSIM_SEED is not an unsigned integer: '") + env + "'");
    }
  }
  c.overlay->apply(config);
  if (s.workers == 0) throw IoError("--workers must be at least 1");
}

ChipProfile resolve_profile(const Settings& s) {
  return s.profile_path.empty() ? builtin_profile(s.profile) : load_profile(s.profile_path);
}

Environment environment(const Settings& s) { return {s.temp, s.field}; }

fs::path output_dir(const Settings& s) {
  fs::path dir(s.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (!fs::is_directory(dir)) throw IoError("cannot create output directory '" + s.out + "'");
  return dir;
}

double single_pulse(const Settings& s) {
  if (s.tw.size() != 1) throw IoError("--tw takes a single value for this command");
  return s.tw.front();
}

int cmd_characterize(const Settings& s) {
  const double tw = single_pulse(s);
  const auto pattern = DataPattern::parse(s.pattern);
  const auto eval_pattern = s.eval_pattern.empty() ? pattern : DataPattern::parse(s.eval_pattern);
  const auto env = environment(s);
  ChipModel chip(resolve_profile(s), s.seed);

  const auto char_map = characterize(chip, tw, s.n, pattern, env, {s.workers, 0});
  if (char_map.warning) std::cerr << "warning: " << *char_map.warning << "\n";
  // The evaluation write continues the chip's write sequence, so it sees
  // jitter independent of the characterization rounds.
  const auto eval_map = characterize(chip, tw, 1, eval_pattern, env);
  const auto stats = compute_stats(char_map, eval_map);

  const auto dir = output_dir(s);
  write_file_atomic(dir / "errmap.json", to_json(char_map).dump(2) + "\n");
  write_file_atomic(dir / "evalmap.json", to_json(eval_map).dump(2) + "\n");
  write_file_atomic(dir / "stats.csv", std::string(kStatsHeader) + "\n" +
                                           stats_row(char_map.chip_id, eval_map.pattern, tw, stats) + "\n");
  return 0;
}

int cmd_sweep(const Settings& s) {
  if (s.tw.empty()) throw IoError("--tw needs at least one value");
  const auto pattern = DataPattern::parse(s.pattern);
  const auto profile = resolve_profile(s);
  const auto curve = s.curve.empty() ? PowerCurve() : read_power_curve(s.curve);
  const auto points = sweep_t_w([&] { return ChipModel(profile, s.seed); }, s.tw, pattern, environment(s));

  std::string csv = "t_w_ns,failed_bit_pct,current_saving_pct,power_reduction_pct\n";
  for (const auto& p : points) {
    const bool on_curve = curve.covers(p.t_w_ns) && curve.covers(s.t_full) && p.t_w_ns <= s.t_full;
    csv += fixed(p.t_w_ns, 2) + "," + fixed(100.0 * p.failed_bit_fraction) + "," +
           (on_curve ? fixed(100.0 * current_saving(curve, p.t_w_ns, s.t_full), 2) : "-") + "," +
           (on_curve ? fixed(100.0 * power_reduction(curve, p.t_w_ns, s.t_full), 2) : "-") + "\n";
  }
  write_file_atomic(output_dir(s) / "sweep.csv", csv);
  return 0;
}

int cmd_image(const Settings& s) {
  const double tw = single_pulse(s);
  InitState init;
  if (s.init == "ones") init = InitState::all_ones;
  else if (s.init == "zeros") init = InitState::all_zeros;
  else throw IoError("--init must be 'ones' or 'zeros'");
  AddressSelection selection;
  if (s.select == "none") selection = AddressSelection::none;
  else if (s.select == "strategy1") selection = AddressSelection::strategy1;
  else throw IoError("--select must be 'none' or 'strategy1'");
  PixelPacking packing;
  if (s.packing == "one") packing = PixelPacking::one_per_word;
  else if (s.packing == "two") packing = PixelPacking::two_per_word;
  else throw IoError("--packing must be 'one' or 'two'");

  const ImageBuffer image = s.image.empty() ? make_test_image() : read_pgm(s.image);
  const std::string image_name = s.image.empty() ? "builtin" : fs::path(s.image).filename().string();
  const auto env = environment(s);
  ChipModel chip(resolve_profile(s), s.seed);
  const auto dir = output_dir(s);

  std::optional<AddressPool> pool;
  if (selection == AddressSelection::strategy1) {
    const auto pattern = DataPattern::parse(s.pattern);
    const auto map = characterize(chip, tw, s.n, pattern, env, {s.workers, 0});
    pool = build_pool(map, chip.capacity(), sort_addresses(map, pattern));
    AddressPool scratch = *pool;
    AllocationTable table(*pool);
    table.assign(scratch, 0, {words_for(image, packing), false});
    write_file_atomic(dir / "pool.csv", std::string(kPoolHeader) + "\n" + pool_row(*pool) + "\n");
    write_file_atomic(dir / "allocation.json", to_json(table).dump(2) + "\n");
  }

  const auto result =
      run_image_experiment(chip, image, init, selection, tw, env, pool ? &*pool : nullptr, packing);
  write_file_atomic(dir / "readback.pgm", encode_pgm(result.readback));
  write_file_atomic(dir / "quality.csv", std::string(kQualityHeader) + "\n" +
                                             quality_row(image_name, init, selection, tw, result.report) + "\n");
  return 0;
}

int cmd_report(const Settings& s, const std::vector<std::string>& char_paths,
               const std::vector<std::string>& eval_paths) {
  std::vector<ErrorMap> chars;
  for (const auto& p : char_paths) chars.push_back(load_error_map(p));
  std::vector<ErrorMap> evals;
  for (const auto& p : eval_paths) evals.push_back(load_error_map(p));
  if (evals.empty()) evals = chars;

  const double tw = chars.front().t_w_ns;
  for (const auto& m : chars)
    if (m.t_w_ns != tw) throw Error("input error maps mix pulse widths");
  for (const auto& m : evals)
    if (m.t_w_ns != tw) throw Error("input error maps mix pulse widths");

  std::string csv = std::string(kStatsHeader) + "\n";
  for (const auto& e : evals) {
    const ErrorMap* c = nullptr;
    for (const auto& m : chars)
      if (m.chip_id == e.chip_id) c = &m;
    if (c == nullptr) throw Error("no characterization map for chip '" + e.chip_id + "'");
    csv += stats_row(e.chip_id, e.pattern, tw, compute_stats(*c, e)) + "\n";
  }
  write_file_atomic(output_dir(s) / "report.csv", csv);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Approximate toggle-MRAM simulator"};
  app.require_subcommand(1);

  Settings s;
  auto characterize_cmd = add_command(app, "characterize", "accumulate an error map and its statistics", s);
  characterize_cmd.overlay->bind("--tw", "tw", s.tw, "write pulse width in ns");
  characterize_cmd.overlay->bind("--n", "n", s.n, "number of measurements");
  characterize_cmd.overlay->bind("--pattern", "pattern", s.pattern, "characterization data pattern");
  characterize_cmd.overlay->bind("--eval-pattern", "eval_pattern", s.eval_pattern,
                                 "evaluation data pattern (default: --pattern)");

  auto sweep_cmd = add_command(app, "sweep", "failed-bit fraction and power figures per pulse width", s);
  sweep_cmd.overlay->bind("--tw", "tw", s.tw, "pulse widths in ns");
  sweep_cmd.app->get_option("--tw")->delimiter(',');
  sweep_cmd.overlay->bind("--pattern", "pattern", s.pattern, "data pattern");
  sweep_cmd.overlay->bind("--curve", "curve", s.curve, "normalized current curve CSV");
  sweep_cmd.overlay->bind("--t-full", "t_full", s.t_full, "full write pulse for the current curve, ns");

  auto image_cmd = add_command(app, "image", "image read-back experiment", s);
  image_cmd.overlay->bind("--image", "image", s.image, "binary PGM (default: built-in 90x90 scene)");
  image_cmd.overlay->bind("--tw", "tw", s.tw, "write pulse width in ns");
  image_cmd.overlay->bind("--n", "n", s.n, "characterization measurements for address selection");
  image_cmd.overlay->bind("--pattern", "pattern", s.pattern, "characterization data pattern");
  image_cmd.overlay->bind("--init", "init", s.init, "memory initialization: ones | zeros");
  image_cmd.overlay->bind("--select", "select", s.select, "address selection: none | strategy1");
  image_cmd.overlay->bind("--packing", "packing", s.packing, "pixels per word: one | two");

  auto report_cmd = add_command(app, "report", "error statistics from saved error maps", s);
  std::vector<std::string> char_paths, eval_paths;
  report_cmd.app->add_option("--char", char_paths, "characterization error map, one per chip (repeatable)")
      ->required()
      ->allow_extra_args(false)
      ->check(CLI::ExistingFile);
  report_cmd.app->add_option("eval", eval_paths, "evaluation error maps")->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*characterize_cmd.app) {
      finish_settings(characterize_cmd, s);
      return cmd_characterize(s);
    }
    if (*sweep_cmd.app) {
      s.tw = {2.5, 5.0, 10.0, 15.0};
      finish_settings(sweep_cmd, s);
      return cmd_sweep(s);
    }
    if (*image_cmd.app) {
      finish_settings(image_cmd, s);
      return cmd_image(s);
    }
    if (*report_cmd.app) {
      finish_settings(report_cmd, s);
      return cmd_report(s, char_paths, eval_paths);
    }
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
