#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "lagvort/flow.hpp"

namespace lagvort {

// Manifest fields: dt, T, h, delta, domain, strategy, and the snapshot file list.
nlohmann::json history_manifest(const FlowHistory& history);

// One CSV per snapshot (t,label_x,label_y,pos_x,pos_y,vorticity,weight) in time order, plus
// manifest.json. Numbers are written with 17 significant digits.
void export_history(const FlowHistory& history, const std::filesystem::path& dir);

std::string snapshot_csv(const FlowHistory& history, int k);

}  // namespace lagvort
