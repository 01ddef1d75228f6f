#pragma once

#include <string>

namespace icmr::infer {

// Native conformance worker speaking the worker protocol on a pair of file
// descriptors. Models:
//
//   identity          echoes every input tensor
//   oracle_segmenter  "mask" from each frame's gt_mask meta, or from the
//                     phantom intensity levels when no ground truth rides
//                     along (reconstructed frames)
//   oracle_landmarks  "landmarks"/"landmark_names" from gt_landmark meta
//   crash             exits with status 3 on the first INFER
//   sleep             waits param sleep_ms before echoing
//
// Only device=cpu is accepted. Returns the process exit status: 0 after
// SHUTDOWN or end of input, 2 on a malformed frame.
struct StubWorkerOptions {
  std::string log_path;  // appends one line per received message when set
};

int run_stub_worker(int in_fd, int out_fd, const StubWorkerOptions& options = {});

}  // namespace icmr::infer
