#pragma once

#include "ovqe/runconfig.hpp"

namespace ovqe {

// Verb implementations behind the CLI. Each validates the config for its
// verb before reading any input, then writes its artifacts under
// cfg.out_dir with fixed names:
//
//   enhance  -> <out>/<stem>/enhanced.yuv (+ psnr.csv with a reference)
//   train    -> <out>/loss.csv, checkpoints at [paths] weights
//               (+ <out>/checkpoint_step<K>.ovqe at the configured interval)
//   evaluate -> <out>/<stem>_qp<QP>/{decoded.yuv, enhanced.yuv, psnr.csv,
//               psnr_curves.svg}
//   bdrate   -> <out>/<stem>_qp<QP>/{psnr.csv} per swept QP, plus
//               <out>/<stem>_bdrate.csv, <out>/<stem>_rd.csv,
//               <out>/<stem>_rd.svg
//
// <stem> is the input file name without extension.

void run_enhance(const RunConfig& cfg);
void run_train(const RunConfig& cfg);
void run_evaluate(const RunConfig& cfg);
void run_bdrate(const RunConfig& cfg);

} // namespace ovqe
