#include "gwa/pipeline/dataset.hpp"

#include <algorithm>
#include <map>
#include <sstream>

#include "gwa/error.hpp"
#include "gwa/pipeline/io.hpp"

namespace gwa {

const std::vector<std::string>& cholec80_phases() {
  static const std::vector<std::string> phases = {
      "Preparation",           "CalotTriangleDissection", "ClippingCutting",       "GallbladderDissection",
      "GallbladderPackaging",  "CleaningCoagulation",     "GallbladderRetraction"};
  return phases;
}

TaskSpec TaskSpec::instrument() {
  return TaskSpec{TaskKind::kInstrument, {"Bipolar", "Scissors", "Clipper", "Irrigator", "SpecimenBag"}};
}

TaskSpec TaskSpec::phase() {
  const auto& all = cholec80_phases();
  return TaskSpec{TaskKind::kPhase, std::vector<std::string>(all.begin() + 1, all.end())};
}

TaskSpec TaskSpec::parse(const std::string& name) {
  if (name == "instrument") return instrument();
  if (name == "phase") return phase();
  throw ConfigError("task must be 'instrument' or 'phase', got '" + name + "'");
}

namespace {

std::size_t phase_index(const std::string& label) {
  const auto& all = cholec80_phases();
  auto it = std::find(all.begin(), all.end(), label);
  if (it == all.end()) throw DataError("unknown phase '" + label + "'");
  return static_cast<std::size_t>(it - all.begin());
}

}  // namespace

void validate_record(const VideoRecord& r, const NodeRoster& roster) {
  const std::string where = "video " + r.video_id + ": ";
  if (r.frames == 0) throw DataError(where + "no frames");
  if (r.phases.classes.size() != cholec80_phases().size()) throw DataError(where + "phase track has wrong size");
  if (r.instruments.classes.size() != roster.size() - 1) throw DataError(where + "instrument track has wrong size");

  std::vector<Interval> all;
  for (const Occurrences& occ : r.phases.classes) {
    try {
      validate_occurrences(occ, r.frames);
    } catch (const DataError& e) {
      throw DataError(where + e.what());
    }
    all.insert(all.end(), occ.begin(), occ.end());
  }
  std::sort(all.begin(), all.end(), [](const Interval& a, const Interval& b) { return a.start < b.start; });
  int expected = 1;
  for (const Interval& iv : all) {
    if (iv.start != expected) {
      throw DataError(where + (iv.start > expected ? "phase gap before frame " : "phase overlap at frame ") +
                      std::to_string(iv.start));
    }
    expected = iv.end + 1;
  }
  if (static_cast<std::size_t>(expected - 1) != r.frames) {
    throw DataError(where + "phases end at frame " + std::to_string(expected - 1) + " of " + std::to_string(r.frames));
  }
  for (const Occurrences& occ : r.instruments.classes) {
    try {
      validate_occurrences(occ, r.frames);
    } catch (const DataError& e) {
      throw DataError(where + e.what());
    }
  }
  for (const Detection& d : r.detections) {
    validate_detection(d, roster);
    if (d.frame < 1 || static_cast<std::size_t>(d.frame) > r.frames) {
      throw DataError(where + "detection at frame " + std::to_string(d.frame) + " beyond annotated range 1.." +
                      std::to_string(r.frames));
    }
  }
}

OccurrenceTrack task_track(const VideoRecord& r, const TaskSpec& task, const NodeRoster& roster) {
  OccurrenceTrack out;
  for (const std::string& name : task.classes) {
    if (task.kind == TaskKind::kInstrument) {
      out.classes.push_back(r.instruments.classes.at(roster.index_of(name) - 1));
    } else {
      out.classes.push_back(r.phases.classes.at(phase_index(name)));
    }
  }
  return out;
}

Occurrences intervals_from_mask(const std::vector<bool>& present) {
  Occurrences out;
  for (std::size_t i = 0; i < present.size(); ++i) {
    if (!present[i]) continue;
    const int frame = static_cast<int>(i) + 1;
    if (!out.empty() && out.back().end == frame - 1) {
      out.back().end = frame;
    } else {
      out.push_back({frame, frame});
    }
  }
  return out;
}

Detection parse_detection_line(const std::string& line, const std::string& source, std::size_t line_no,
                                            std::string* video_id) {
  const auto f = io::split_fields(line);
  if (f.size() != 8) throw ParseError(source, line_no, "expected 8 fields, got " + std::to_string(f.size()));
  if (f[0].empty()) throw ParseError(source, line_no, "empty video id");
  Detection d;
  d.frame = static_cast<int>(io::parse_int(f[1], source, line_no));
  const long long cls = io::parse_int(f[2], source, line_no);
  if (cls < 0) throw ParseError(source, line_no, "negative class id");
  d.class_id = static_cast<std::size_t>(cls);
  d.cx = io::parse_double(f[3], source, line_no);
  d.cy = io::parse_double(f[4], source, line_no);
  d.w = io::parse_double(f[5], source, line_no);
  d.h = io::parse_double(f[6], source, line_no);
  d.confidence = io::parse_double(f[7], source, line_no);
  if (video_id) *video_id = f[0];
  return d;
}

namespace {

template <typename Fn>
void for_each_data_line(const std::string& text, const std::string& source, const std::string& header_prefix,
                        Fn&& fn) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (io::trim(line).empty()) continue;
    if (!header) {
      if (io::trim(line).rfind(header_prefix, 0) != 0) {
        throw ParseError(source, line_no, "missing header line starting with '" + header_prefix + "'");
      }
      header = true;
      continue;
    }
    fn(line, line_no);
  }
  if (!header) throw ParseError(source, line_no, "missing header line");
}

}  // namespace

std::vector<VideoRecord> load_dataset(const std::filesystem::path& detections_path,
                                      const std::filesystem::path& annotations_path, const NodeRoster& roster) {
  std::vector<VideoRecord> records;
  std::map<std::string, std::size_t> index;
  const std::string ann_src = annotations_path.string();

  auto record_for = [&](const std::string& id) -> VideoRecord& {
    auto [it, inserted] = index.try_emplace(id, records.size());
    if (inserted) {
      VideoRecord r;
      r.video_id = id;
      r.instruments.classes.resize(roster.size() - 1);
      r.phases.classes.resize(cholec80_phases().size());
      records.push_back(std::move(r));
    }
    return records[it->second];
  };

  for_each_data_line(io::read_file(annotations_path), ann_src, "video_id", [&](const std::string& line, std::size_t n) {
    const auto f = io::split_fields(line);
    if (f.size() != 5) throw ParseError(ann_src, n, "expected 5 fields, got " + std::to_string(f.size()));
    if (f[0].empty()) throw ParseError(ann_src, n, "empty video id");
    const long long start = io::parse_int(f[3], ann_src, n);
    const long long end = io::parse_int(f[4], ann_src, n);
    if (start < 1 || end < start) throw ParseError(ann_src, n, "bad interval");
    VideoRecord& r = record_for(f[0]);
    const Interval iv{static_cast<int>(start), static_cast<int>(end)};
    try {
      if (f[1] == "phase") {
        r.phases.classes[phase_index(f[2])].push_back(iv);
        r.frames = std::max(r.frames, static_cast<std::size_t>(end));
      } else if (f[1] == "instrument") {
        const std::size_t idx = roster.index_of(f[2]);
        if (idx == 0) throw DataError("the centre node is not an instrument");
        r.instruments.classes[idx - 1].push_back(iv);
      } else {
        throw ParseError(ann_src, n, "track must be 'phase' or 'instrument', got '" + f[1] + "'");
      }
    } catch (const ParseError&) {
      throw;
    } catch (const DataError& e) {
      throw ParseError(ann_src, n, e.what());
    }
  });

  auto by_start = [](const Interval& a, const Interval& b) { return a.start < b.start; };
  for (VideoRecord& r : records) {
    for (auto& occ : r.phases.classes) std::sort(occ.begin(), occ.end(), by_start);
    for (auto& occ : r.instruments.classes) std::sort(occ.begin(), occ.end(), by_start);
  }

  const std::string det_src = detections_path.string();
  for_each_data_line(io::read_file(detections_path), det_src, "video_id", [&](const std::string& line, std::size_t n) {
    std::string id;
    const Detection d = parse_detection_line(line, det_src, n, &id);
    auto it = index.find(id);
    if (it == index.end()) throw ParseError(det_src, n, "video '" + id + "' has no annotations");
    VideoRecord& r = records[it->second];
    if (d.frame < 1 || static_cast<std::size_t>(d.frame) > r.frames) {
      throw ParseError(det_src, n, "frame " + std::to_string(d.frame) + " beyond annotated range 1.." +
                                       std::to_string(r.frames));
    }
    try {
      validate_detection(d, roster);
    } catch (const DataError& e) {
      throw ParseError(det_src, n, e.what());
    }
    r.detections.push_back(d);
  });

  for (const VideoRecord& r : records) validate_record(r, roster);
  return records;
}

std::string detections_csv(const std::vector<VideoRecord>& records) {
  std::ostringstream os;
  os << "video_id,frame,class_id,cx,cy,w,h,confidence\n";
  for (const VideoRecord& r : records) {
    for (const Detection& d : r.detections) {
      os << r.video_id << ',' << d.frame << ',' << d.class_id << ',' << io::format_double(d.cx) << ','
         << io::format_double(d.cy) << ',' << io::format_double(d.w) << ',' << io::format_double(d.h) << ','
         << io::format_double(d.confidence) << '\n';
    }
  }
  return os.str();
}

std::string annotations_csv(const std::vector<VideoRecord>& records, const NodeRoster& roster) {
  std::ostringstream os;
  os << "video_id,track,label,start_frame,end_frame\n";
  for (const VideoRecord& r : records) {
    for (std::size_t p = 0; p < r.phases.classes.size(); ++p)
      for (const Interval& iv : r.phases.classes[p])
        os << r.video_id << ",phase," << cholec80_phases()[p] << ',' << iv.start << ',' << iv.end << '\n';
    for (std::size_t k = 0; k < r.instruments.classes.size(); ++k)
      for (const Interval& iv : r.instruments.classes[k])
        os << r.video_id << ",instrument," << roster.label(k + 1) << ',' << iv.start << ',' << iv.end << '\n';
  }
  return os.str();
}

void save_dataset(const std::vector<VideoRecord>& records, const NodeRoster& roster,
                  const std::filesystem::path& detections_path, const std::filesystem::path& annotations_path) {
  io::write_file_atomic(detections_path, detections_csv(records));
  io::write_file_atomic(annotations_path, annotations_csv(records, roster));
}

namespace {

// Cholec80 phase files use these spellings.
std::size_t cholec80_phase_label(const std::string& label) {
  const auto& all = cholec80_phases();
  auto it = std::find(all.begin(), all.end(), label);
  if (it == all.end()) throw DataError("unknown Cholec80 phase '" + label + "'");
  return static_cast<std::size_t>(it - all.begin());
}

std::vector<std::vector<std::string>> tab_rows(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (io::trim(line).empty()) continue;
    std::vector<std::string> fields;
    std::istringstream ls(line);
    std::string f;
    while (ls >> f) fields.push_back(f);
    rows.push_back(std::move(fields));
  }
  return rows;
}

}  // namespace

VideoRecord import_cholec80(const std::string& video_id, const std::string& phase_text, const std::string& tool_text,
                            const NodeRoster& roster) {
  const std::string src = video_id + " phase annotations";
  const auto phase_rows = tab_rows(phase_text);
  if (phase_rows.size() < 2) throw DataError(src + ": no rows");
  // 25 fps labels; keep one every 25 frames (frame 0 -> second 1).
  std::vector<std::size_t> per_second;
  for (std::size_t i = 1; i < phase_rows.size(); ++i) {
    const auto& row = phase_rows[i];
    if (row.size() != 2) throw ParseError(src, i + 1, "expected 'Frame Phase'");
    const long long frame = io::parse_int(row[0], src, i + 1);
    if (frame % 25 != 0) continue;
    if (static_cast<std::size_t>(frame / 25) != per_second.size()) throw ParseError(src, i + 1, "frames out of order");
    per_second.push_back(cholec80_phase_label(row[1]));
  }
  VideoRecord r;
  r.video_id = video_id;
  r.frames = per_second.size();
  r.phases.classes.resize(cholec80_phases().size());
  for (std::size_t p = 0; p < r.phases.classes.size(); ++p) {
    std::vector<bool> mask(r.frames);
    for (std::size_t t = 0; t < r.frames; ++t) mask[t] = per_second[t] == p;
    r.phases.classes[p] = intervals_from_mask(mask);
  }

  const std::string tsrc = video_id + " tool annotations";
  const auto tool_rows = tab_rows(tool_text);
  if (tool_rows.empty()) throw DataError(tsrc + ": no rows");
  const auto& header = tool_rows[0];
  std::vector<std::size_t> columns;  // roster index per tool column
  for (std::size_t j = 1; j < header.size(); ++j) columns.push_back(roster.index_of(header[j]));
  std::vector<std::vector<bool>> masks(roster.size() - 1, std::vector<bool>(r.frames, false));
  for (std::size_t i = 1; i < tool_rows.size(); ++i) {
    const auto& row = tool_rows[i];
    if (row.size() != header.size()) throw ParseError(tsrc, i + 1, "column count differs from header");
    const long long frame = io::parse_int(row[0], tsrc, i + 1);
    if (frame % 25 != 0) throw ParseError(tsrc, i + 1, "tool rows must be sampled every 25 frames");
    const std::size_t t = static_cast<std::size_t>(frame / 25);
    if (t >= r.frames) continue;
    for (std::size_t j = 0; j < columns.size(); ++j) {
      const long long flag = io::parse_int(row[j + 1], tsrc, i + 1);
      masks[columns[j] - 1][t] = flag != 0;
    }
  }
  r.instruments.classes.resize(roster.size() - 1);
  for (std::size_t k = 0; k < masks.size(); ++k) r.instruments.classes[k] = intervals_from_mask(masks[k]);
  validate_record(r, roster);
  return r;
}

std::vector<const VideoRecord*> select_videos(const std::vector<VideoRecord>& records,
                                              const std::vector<std::string>& ids) {
  std::vector<const VideoRecord*> out;
  if (ids.empty()) {
    for (const VideoRecord& r : records) out.push_back(&r);
    return out;
  }
  for (const std::string& id : ids) {
    auto it = std::find_if(records.begin(), records.end(), [&](const VideoRecord& r) { return r.video_id == id; });
    if (it == records.end()) throw ConfigError("video '" + id + "' not found in the dataset");
    out.push_back(&*it);
  }
  return out;
}

}  // namespace gwa
