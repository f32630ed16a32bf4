// Command-line entry points for the codec: train, encode, decode, eval,
// inspect-codebook. Exit codes: 0 ok, 1 usage/other, 2 input format mismatch,
// 3 corrupt checkpoint, 4 stream/checkpoint mismatch, 5 corrupt/truncated
// token stream.

#include <CLI11.hpp>
#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>

#include "eulero/bitstream.hpp"
#include "eulero/metrics.hpp"
#include "eulero/model.hpp"
#include "eulero/serialize.hpp"
#include "eulero/trainer.hpp"
#include "eulero/wav.hpp"

namespace fs = std::filesystem;
using namespace eulero;

namespace {

constexpr int kExitInputFormat = 2;
constexpr int kExitCorruptCheckpoint = 3;
constexpr int kExitStreamMismatch = 4;
constexpr int kExitCorruptStream = 5;

struct CliError {
  int code;
  std::string message;
};

[[noreturn]] void fail(int code, const std::string& message) {
  throw CliError{code, message};
}

serialize::Checkpoint load_checkpoint_or_fail(const std::string& path) {
  try {
    return serialize::load_checkpoint(path);
  } catch (const std::exception& e) {
    fail(kExitCorruptCheckpoint, std::string("checkpoint: ") + e.what());
  }
}

model::CodecModel restore_model(const serialize::Checkpoint& ck, unsigned seed) {
  try {
    model::ModelConfig cfg =
        model::config_from_document(serialize::parse_config(ck.config_text));
    model::CodecModel m(cfg, seed);
    serialize::load_into(ck, m.params);
    if (ck.has_quantizer) {
      if (ck.quantizer.cfg.dim != cfg.quant.dim ||
          ck.quantizer.cfg.codebook_size != cfg.quant.codebook_size ||
          ck.quantizer.cfg.stages != cfg.quant.stages)
        throw std::runtime_error("quantizer state does not match config");
      m.quantizer.stages = ck.quantizer.stages;
      m.quantizer.seeded = ck.quantizer.seeded;
    }
    return m;
  } catch (const CliError&) {
    throw;
  } catch (const std::exception& e) {
    fail(kExitCorruptCheckpoint, std::string("checkpoint: ") + e.what());
  }
}

AudioBuffer read_wav_checked(const std::string& path, int want_rate) {
  wav::WavInfo info;
  AudioBuffer audio;
  try {
    audio = wav::read(path, &info);
  } catch (const std::exception& e) {
    std::string what = e.what();
    if (what.find("mono required") != std::string::npos)
      fail(kExitInputFormat, path + ": stereo input not supported (mono required)");
    fail(1, what);
  }
  if (audio.sample_rate != want_rate)
    fail(kExitInputFormat, path + ": sample rate " + std::to_string(audio.sample_rate) +
                               " Hz, expected " + std::to_string(want_rate) + " Hz");
  return audio;
}

void write_wav_atomic(const std::string& path, const AudioBuffer& audio) {
  const std::string tmp = path + ".tmp";
  wav::write(tmp, audio);
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    std::remove(tmp.c_str());
    throw std::runtime_error("cannot rename into place: " + path);
  }
}

std::vector<std::string> list_wavs(const std::string& dir) {
  std::vector<std::string> out;
  if (!fs::is_directory(dir)) return out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".wav")
      out.push_back(e.path().string());
  std::sort(out.begin(), out.end());
  return out;
}

// ---- train ------------------------------------------------------------------

int cmd_train(const std::string& data_dir, const std::string& out_path,
              const std::string& preset, int bitrate, int64_t steps, int batch,
              unsigned seed, const std::string& config_path) {
  std::map<std::string, std::string> overrides;
  if (!config_path.empty())
    overrides = serialize::parse_config(serialize::read_file(config_path));
  overrides.emplace("preset", preset);
  overrides.emplace("time_stride", bitrate == 12000 ? "4" : "8");
  model::ModelConfig cfg = model::config_from_document(overrides);

  auto files = list_wavs(data_dir);
  if (files.empty()) fail(1, "no .wav files in dataset directory: " + data_dir);
  std::vector<AudioBuffer> dataset;
  for (const auto& f : files) dataset.push_back(read_wav_checked(f, cfg.sample_rate));
  std::cout << "dataset: " << dataset.size() << " clips\n";

  model::CodecModel m(cfg, seed);
  trainer::TrainConfig tc;
  tc.total_steps = steps;
  tc.batch_size = batch;
  tc.seed = seed;
  tc.checkpoint_path = out_path;
  auto it = overrides.find("segment_seconds");
  if (it != overrides.end()) tc.segment_seconds = std::stod(it->second);
  trainer::Trainer tr(m, tc);
  auto result = tr.run(dataset);
  if (result.aborted_non_finite) {
    std::cerr << "training aborted on non-finite loss; last checkpoint retained\n";
    return 1;
  }
  std::cout << "trained " << result.steps_run << " steps; checkpoint: " << out_path << "\n";
  return 0;
}

// ---- encode -----------------------------------------------------------------

int cmd_encode(const std::string& in_wav, const std::string& ck_path,
               const std::string& out_bits, unsigned seed) {
  auto ck = load_checkpoint_or_fail(ck_path);
  model::CodecModel m = restore_model(ck, seed);
  if (!m.quantizer.seeded)
    fail(kExitCorruptCheckpoint, "checkpoint has no trained codebooks");
  m.training = false;
  AudioBuffer audio = read_wav_checked(in_wav, m.cfg.sample_rate);

  auto tokens = m.encode_tokens(audio);

  bitstream::StreamHeader h;
  h.sample_rate = static_cast<uint32_t>(m.cfg.sample_rate);
  h.n_fft = static_cast<uint32_t>(m.cfg.stft.n_fft);
  h.hop = static_cast<uint32_t>(m.cfg.stft.hop_length);
  h.stride = static_cast<uint32_t>(m.cfg.time_stride_target);
  h.stages = static_cast<uint32_t>(m.cfg.quant.stages);
  h.codebook_size = static_cast<uint32_t>(m.cfg.quant.codebook_size);
  h.frame_count = static_cast<uint32_t>(tokens[0].size());
  h.original_length_samples = audio.samples.size();
  auto bytes = bitstream::pack(tokens, h);
  serialize::write_file_atomic(out_bits, std::string(bytes.begin(), bytes.end()));

  std::printf("wrote %s: %zu bytes (%lld payload)\n", out_bits.c_str(), bytes.size(),
              static_cast<long long>(bitstream::payload_bytes(h)));
  std::printf("token rate: %.3f tokens/s per stage\n", bitstream::token_rate(h));
  std::printf("bitrate: %.1f bps\n", bitstream::bitrate(h));
  return 0;
}

// ---- decode -----------------------------------------------------------------

int cmd_decode(const std::string& in_bits, const std::string& ck_path,
               const std::string& out_wav, unsigned seed) {
  auto ck = load_checkpoint_or_fail(ck_path);
  model::CodecModel m = restore_model(ck, seed);
  m.training = false;

  std::string raw;
  try {
    raw = serialize::read_file(in_bits);
  } catch (const std::exception& e) {
    fail(1, e.what());
  }
  bitstream::TokenStream ts;
  try {
    ts = bitstream::unpack(std::vector<uint8_t>(raw.begin(), raw.end()));
  } catch (const std::exception& e) {
    fail(kExitCorruptStream, std::string("token stream: ") + e.what());
  }
  const auto& h = ts.header;
  if (static_cast<int>(h.sample_rate) != m.cfg.sample_rate ||
      static_cast<int>(h.n_fft) != m.cfg.stft.n_fft ||
      static_cast<int>(h.hop) != m.cfg.stft.hop_length ||
      static_cast<int>(h.stride) != m.cfg.time_stride_target ||
      static_cast<int>(h.stages) != m.cfg.quant.stages ||
      static_cast<int>(h.codebook_size) != m.cfg.quant.codebook_size)
    fail(kExitStreamMismatch, "stream header does not match checkpoint configuration");

  AudioBuffer out;
  try {
    out = m.decode_tokens(ts.indices, static_cast<int64_t>(h.original_length_samples));
  } catch (const std::invalid_argument& e) {
    fail(kExitStreamMismatch, e.what());
  }
  write_wav_atomic(out_wav, out);
  std::printf("wrote %s: %zu samples (%.3f s)\n", out_wav.c_str(), out.samples.size(),
              out.duration());
  return 0;
}

// ---- eval -------------------------------------------------------------------

std::map<std::string, double> read_score_file(const std::string& path) {
  std::map<std::string, double> scores;
  if (path.empty()) return scores;
  std::istringstream in(serialize::read_file(path));
  std::string line;
  while (std::getline(in, line)) {
    auto comma = line.find_first_of(", \t");
    if (comma == std::string::npos) continue;
    try {
      scores[line.substr(0, comma)] = std::stod(line.substr(comma + 1));
    } catch (...) {
    }
  }
  return scores;
}

int cmd_eval(const std::string& ref_dir, const std::string& deg_dir,
             const std::string& ck_path, const std::string& out_csv,
             const std::string& pesq_path, const std::string& estoi_path, unsigned seed) {
  if (deg_dir.empty() == ck_path.empty())
    fail(1, "eval needs exactly one of --deg or --checkpoint");
  auto refs = list_wavs(ref_dir);
  if (refs.empty()) fail(1, "no .wav files in " + ref_dir);

  std::unique_ptr<model::CodecModel> codec;
  if (!ck_path.empty()) {
    auto ck = load_checkpoint_or_fail(ck_path);
    codec = std::make_unique<model::CodecModel>(restore_model(ck, seed));
    codec->training = false;
  }
  auto pesq = read_score_file(pesq_path);
  auto estoi = read_score_file(estoi_path);

  std::ostringstream csv;
  csv << "file,si_sdr_db,lsd_db,gdd,duration_s";
  if (!pesq.empty()) csv << ",pesq";
  if (!estoi.empty()) csv << ",estoi";
  csv << "\n";

  metrics::MetricReport sum;
  int rows = 0;
  for (const auto& ref_path : refs) {
    const std::string name = fs::path(ref_path).filename().string();
    AudioBuffer ref = read_wav_checked(ref_path, codec ? codec->cfg.sample_rate : 24000);
    AudioBuffer deg;
    if (codec) {
      auto tokens = codec->encode_tokens(ref);
      deg = codec->decode_tokens(tokens, static_cast<int64_t>(ref.samples.size()));
    } else {
      const std::string deg_path = (fs::path(deg_dir) / name).string();
      if (!fs::exists(deg_path)) {
        std::cerr << "warning: no pair for " << name << ", skipped\n";
        continue;
      }
      deg = read_wav_checked(deg_path, ref.sample_rate);
      if (deg.samples.size() != ref.samples.size()) {
        std::cerr << "warning: length mismatch for " << name << ", skipped\n";
        continue;
      }
    }
    StftConfig mcfg = codec ? codec->cfg.stft : StftConfig{512, 512, 64};
    auto r = metrics::evaluate(deg, ref, mcfg);
    csv << name << "," << r.si_sdr << "," << r.lsd << "," << r.gdd << "," << r.duration;
    if (!pesq.empty()) csv << "," << (pesq.count(name) ? std::to_string(pesq[name]) : "");
    if (!estoi.empty()) csv << "," << (estoi.count(name) ? std::to_string(estoi[name]) : "");
    csv << "\n";
    sum.si_sdr += r.si_sdr;
    sum.lsd += r.lsd;
    sum.gdd += r.gdd;
    sum.duration += r.duration;
    ++rows;
  }
  if (rows == 0) fail(1, "no evaluable pairs");
  csv << "mean," << sum.si_sdr / rows << "," << sum.lsd / rows << "," << sum.gdd / rows
      << "," << sum.duration / rows;
  if (!pesq.empty()) csv << ",";
  if (!estoi.empty()) csv << ",";
  csv << "\n";
  serialize::write_file_atomic(out_csv, csv.str());
  std::cout << "wrote " << out_csv << " (" << rows << " rows + mean)\n";
  return 0;
}

// ---- inspect-codebook -------------------------------------------------------

int cmd_inspect(const std::string& ck_path) {
  auto ck = load_checkpoint_or_fail(ck_path);
  if (!ck.has_quantizer) fail(kExitCorruptCheckpoint, "checkpoint has no quantizer state");
  const auto& q = ck.quantizer;
  std::printf("stages=%d codebook_size=%d dim=%d seeded=%d\n", q.cfg.stages,
              q.cfg.codebook_size, q.cfg.dim, q.seeded ? 1 : 0);
  for (size_t s = 0; s < q.stages.size(); ++s) {
    const auto& cb = q.stages[s];
    int live = 0;
    double total = 0, ent = 0;
    for (double c : cb.ema_count) {
      if (c >= q.cfg.dead_threshold) ++live;
      total += c;
    }
    for (double c : cb.ema_count)
      if (c > 0 && total > 0) {
        double p = c / total;
        ent -= p * std::log(p);
      }
    double nmin = 1e30, nmax = 0, nsum = 0;
    for (int k = 0; k < cb.size(); ++k) {
      double n2 = 0;
      for (int d = 0; d < cb.dim(); ++d)
        n2 += std::norm(cb.embed[static_cast<int64_t>(k) * cb.dim() + d]);
      double n = std::sqrt(n2);
      nmin = std::min(nmin, n);
      nmax = std::max(nmax, n);
      nsum += n;
    }
    std::printf(
        "stage=%zu live=%d/%d utilization=%.3f perplexity=%.1f count_total=%.2f "
        "norm_min=%.4f norm_mean=%.4f norm_max=%.4f\n",
        s, live, cb.size(), static_cast<double>(live) / cb.size(), std::exp(ent), total,
        nmin, nsum / cb.size(), nmax);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"complex-spectrum neural audio codec"};
  app.require_subcommand(1);
  unsigned seed = 1234;
  app.add_option("--seed", seed, "global random seed")->capture_default_str();

  auto* train = app.add_subcommand("train", "train a codec on a directory of WAV files");
  std::string data_dir, out_path = "checkpoint.bin", preset = "toy", config_path;
  int bitrate = 6000;
  int64_t steps = 2000;
  int batch = 16;
  train->add_option("--data", data_dir, "dataset directory")->required();
  train->add_option("--out", out_path, "checkpoint output path")->capture_default_str();
  train->add_option("--preset", preset, "model preset: toy | paper")
      ->check(CLI::IsMember({"toy", "paper"}))
      ->capture_default_str();
  train->add_option("--bitrate", bitrate, "target bitrate: 6000 | 12000")
      ->check(CLI::IsMember({6000, 12000}))
      ->capture_default_str();
  train->add_option("--steps", steps, "optimizer steps")->capture_default_str();
  train->add_option("--batch", batch, "batch size")->capture_default_str();
  train->add_option("--config", config_path, "key=value config document with overrides");

  auto* encode = app.add_subcommand("encode", "encode a WAV file to a token stream");
  std::string enc_in, enc_ck, enc_out;
  encode->add_option("input", enc_in, "input WAV")->required();
  encode->add_option("checkpoint", enc_ck, "model checkpoint")->required();
  encode->add_option("output", enc_out, "output token stream")->required();

  auto* decode = app.add_subcommand("decode", "decode a token stream to a WAV file");
  std::string dec_in, dec_ck, dec_out;
  decode->add_option("input", dec_in, "input token stream")->required();
  decode->add_option("checkpoint", dec_ck, "model checkpoint")->required();
  decode->add_option("output", dec_out, "output WAV")->required();

  auto* eval = app.add_subcommand("eval", "compute SI-SDR/LSD/GDD reports");
  std::string ref_dir, deg_dir, eval_ck, out_csv = "report.csv", pesq_path, estoi_path;
  eval->add_option("--ref", ref_dir, "reference WAV directory")->required();
  eval->add_option("--deg", deg_dir, "degraded WAV directory");
  eval->add_option("--checkpoint", eval_ck, "codec checkpoint (encode+decode refs)");
  eval->add_option("--out", out_csv, "CSV report path")->capture_default_str();
  eval->add_option("--pesq", pesq_path, "external PESQ scores (file,score per line)");
  eval->add_option("--estoi", estoi_path, "external ESTOI scores (file,score per line)");

  auto* inspect = app.add_subcommand("inspect-codebook", "print quantizer statistics");
  std::string ins_ck;
  inspect->add_option("checkpoint", ins_ck, "model checkpoint")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) return cmd_train(data_dir, out_path, preset, bitrate, steps, batch, seed,
                                 config_path);
    if (*encode) return cmd_encode(enc_in, enc_ck, enc_out, seed);
    if (*decode) return cmd_decode(dec_in, dec_ck, dec_out, seed);
    if (*eval) return cmd_eval(ref_dir, deg_dir, eval_ck, out_csv, pesq_path, estoi_path, seed);
    if (*inspect) return cmd_inspect(ins_ck);
  } catch (const CliError& e) {
    std::cerr << "error: " << e.message << "\n";
    return e.code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
