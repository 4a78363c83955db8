#pragma once

// Row-following navigation stack with a deterministic 2-D field simulator:
// LiDAR row perception, odometry/gyro EKF fusion, vector-field local goal,
// PID heading control, and a benchmark harness around them.

#include "rownav/config.hpp"
#include "rownav/ekf.hpp"
#include "rownav/field.hpp"
#include "rownav/geometry.hpp"
#include "rownav/goal_control.hpp"
#include "rownav/harness.hpp"
#include "rownav/log_io.hpp"
#include "rownav/perception.hpp"
#include "rownav/rng.hpp"
#include "rownav/scan.hpp"
