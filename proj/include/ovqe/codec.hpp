#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ovqe/frame.hpp"

namespace ovqe {

struct CodecResult {
    Sequence decoded;
    double bitrate_kbps = 0.0;
    uint64_t bitstream_bytes = 0;
};

enum class CodecKind { Mock, External };

// Description of one encode/decode run. External codecs are driven through
// command templates with {input}/{bitstream}/{output}/{width}/{height}/
// {fps}/{frames}/{qp}/{bitdepth} placeholders; encoder extra_flags are
// appended verbatim.
struct CodecSpec {
    CodecKind kind = CodecKind::Mock;
    std::string encoder_path;
    std::string decoder_path;
    std::string encoder_template;
    std::string decoder_template;
    int qp = 37;
    std::vector<std::string> extra_flags;
    bool keep_temp = false;

    static const char* default_encoder_template();
    static const char* default_decoder_template();
};

// HEVC-family quantizer step for a given QP.
double qp_to_step(int qp);

// Scalar uniform quantizer (round half away from zero) and its inverse.
int64_t quantize_coeff(double coeff, double step);
double dequantize_coeff(int64_t level, double step);

// Orthonormal 8x8 DCT-II / DCT-III pair. Both spans must hold exactly 64
// row-major values.
void dct8_forward(std::span<const double> block, std::span<double> coeffs);
void dct8_inverse(std::span<const double> coeffs, std::span<double> block);

// Block-DCT stand-in codec: 8x8 forward DCT, uniform quantization at
// qp_to_step(qp), dequantization, inverse DCT, clamp. The pseudo-bitstream
// charges one byte per surviving (nonzero) quantized coefficient.
CodecResult mock_encode_decode(const Sequence& seq, int qp);

// Runs the configured codec chain over the sequence. Mock specs never touch
// the filesystem; external specs stage raw YUV in workdir, invoke the
// encoder and decoder subprocesses, and clean up after themselves unless
// keep_temp is set.
CodecResult encode_decode(const Sequence& seq, const CodecSpec& spec,
                          const std::filesystem::path& workdir);

} // namespace ovqe
