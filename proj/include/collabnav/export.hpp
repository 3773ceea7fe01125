#pragma once

#include <collabnav/eval.hpp>
#include <collabnav/planner.hpp>

#include <filesystem>
#include <span>
#include <string>

namespace collabnav::report {

/// Number with six decimals, as used in every CSV.
std::string fixed6(double v);

/// policy,robots,reached,sr,apl,decisions,scored_decisions,acc,violations,apl_basis
std::string metrics_csv(std::span<const eval::PolicyEvaluation> runs);

/// policy,bin,lower,upper,frequency; the last bin has upper = inf.
std::string histogram_csv(std::span<const eval::PolicyEvaluation> runs);

/// step,t,x,y,heading,mode,v,omega,waiting for one robot.
std::string trajectory_csv(const planner::EpisodeLog& log, std::size_t robot);

/// step,robot,neighbors,advice,chosen (neighbor ids separated by ';').
std::string decision_csv(const planner::EpisodeLog& log);

/// Map with obstacles, static robots, start dots, goal stars, paths of the
/// moving robots and key-point decision markers.
std::string trajectory_svg(const eval::EpisodeSpec& spec, const planner::EpisodeLog& log);

/// Throws IoError.
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace collabnav::report
