#pragma once

#include <string>
#include <vector>

#include "rmlab/corpus.hpp"

namespace rmlab {

// JSONL persistence for the three record schemas. Field names are
// lower_snake_case as written. Readers report malformed lines and schema
// violations with the file path, 1-based line number, and field name.
// Unknown fields are preserved in the record's `extra` slot on read and
// merged back on write; in strict mode they are rejected instead.

std::vector<SyntheticSample> read_samples(const std::string& path, bool strict = false);
void write_samples(const std::string& path, const std::vector<SyntheticSample>& samples);

std::vector<AnnotationRecord> read_annotations(const std::string& path, bool strict = false);
void write_annotations(const std::string& path, const std::vector<AnnotationRecord>& records);

std::vector<PreferencePair> read_pairs(const std::string& path, bool strict = false);
void write_pairs(const std::string& path, const std::vector<PreferencePair>& pairs);

}  // namespace rmlab
