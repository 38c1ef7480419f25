#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "gwa/anticipation.hpp"
#include "gwa/graph.hpp"

namespace gwa {

// Cholec80 surgical phases in workflow order.
const std::vector<std::string>& cholec80_phases();

enum class TaskKind { kInstrument, kPhase };

struct TaskSpec {
  TaskKind kind = TaskKind::kInstrument;
  std::vector<std::string> classes;

  // Bipolar, Scissors, Clipper, Irrigator, SpecimenBag. Grasper and hook are
  // present almost throughout and are not anticipated.
  static TaskSpec instrument();
  // Every phase after Preparation, which always comes first.
  static TaskSpec phase();
  static TaskSpec parse(const std::string& name);

  std::string name() const { return kind == TaskKind::kInstrument ? "instrument" : "phase"; }
  std::size_t num_classes() const { return classes.size(); }
};

struct VideoRecord {
  std::string video_id;
  std::size_t frames = 0;
  std::vector<Detection> detections;
  OccurrenceTrack instruments;  // one entry per roster instrument (roster index - 1)
  OccurrenceTrack phases;       // one entry per cholec80_phases() label

  bool operator==(const VideoRecord&) const = default;
};

// Phase intervals must tile [1, frames] without gaps or overlap; instrument
// intervals must lie inside it; detections must sit on annotated frames.
void validate_record(const VideoRecord& record, const NodeRoster& roster);

// Presence track of the task's target classes, in TaskSpec order.
OccurrenceTrack task_track(const VideoRecord& record, const TaskSpec& task, const NodeRoster& roster);

// Builds sorted intervals from a per-frame presence mask (index 0 = frame 1).
Occurrences intervals_from_mask(const std::vector<bool>& present);

// Files:
//   detections:  video_id,frame,class_id,cx,cy,w,h,confidence
//   annotations: video_id,track,label,start_frame,end_frame  (track = phase|instrument)
// Both need the header line. Videos keep the order in which the annotation
// file first mentions them.
std::vector<VideoRecord> load_dataset(const std::filesystem::path& detections_path,
                                      const std::filesystem::path& annotations_path, const NodeRoster& roster);

Detection parse_detection_line(const std::string& line, const std::string& source, std::size_t line_no,
                                            std::string* video_id);

std::string detections_csv(const std::vector<VideoRecord>& records);
std::string annotations_csv(const std::vector<VideoRecord>& records, const NodeRoster& roster);
void save_dataset(const std::vector<VideoRecord>& records, const NodeRoster& roster,
                  const std::filesystem::path& detections_path, const std::filesystem::path& annotations_path);

// Cholec80's native per-frame annotations (25 fps phase labels, 1 fps tool
// flags) converted to one record without detections.
VideoRecord import_cholec80(const std::string& video_id, const std::string& phase_text,
                            const std::string& tool_text, const NodeRoster& roster);

std::vector<const VideoRecord*> select_videos(const std::vector<VideoRecord>& records,
                                              const std::vector<std::string>& ids);

}  // namespace gwa
