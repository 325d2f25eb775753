#include "core/trajectory.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "core/errors.hpp"

namespace mergerl {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string trajectory_csv(const std::vector<TrajectoryRow>& rows) {
    std::ostringstream out;
    out << "t,v_m,p_m,phi_m,l_m,r_m,v_f,p_f,v_l,p_l,accel,steering,reward,terminal,event\n";
    for (const auto& row : rows) {
        out << row.t;
        for (double v : row.obs.as_array()) out << ',' << format_double(v);
        out << ',' << format_double(row.action.accel) << ',' << format_double(row.action.steer)
            << ',' << format_double(row.reward) << ',' << (row.terminal ? 1 : 0) << ','
            << event_name(row.event) << '\n';
    }
    return out.str();
}

void write_trajectory_csv(const std::vector<TrajectoryRow>& rows, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("trajectory: cannot open " + path + " for writing");
    out << trajectory_csv(rows);
    if (!out) throw IoError("trajectory: write failed for " + path);
}

}  // namespace mergerl
