#pragma once

#include <string>
#include <vector>

#include "core/merge_env.hpp"

namespace mergerl {

struct TrajectoryRow {
    int t = 0;
    Observation obs;
    Action action;
    double reward = 0.0;
    bool terminal = false;
    TerminalEvent event = TerminalEvent::Running;
};

// %.17g: enough digits that parsing the text reproduces the double exactly.
std::string format_double(double v);

// CSV header: t,v_m,p_m,phi_m,l_m,r_m,v_f,p_f,v_l,p_l,accel,steering,reward,terminal,event
std::string trajectory_csv(const std::vector<TrajectoryRow>& rows);
void write_trajectory_csv(const std::vector<TrajectoryRow>& rows, const std::string& path);

}  // namespace mergerl
