"""Multiple-description coding by dithered noise-shaped oversampled quantization.

A source block is oversampled, quantized with subtractive dither inside a
noise-feedback loop, and the quantizer outputs are split by time phase
into K descriptions.  The library provides the codec, the closed-form
rate/distortion accounting it must match, noise-shaping filter design,
and a seeded Monte-Carlo harness that checks one against the other.
"""

from .dsp import (
    InterpolatorSpec,
    SignalBlock,
    base_block,
    halfsample_allpass,
    ideal_fractional_delay,
    ideal_lowpass_downsample,
    ideal_upsample,
    lowpass_downsample2,
    spectrum_power,
    upsample2,
)
from .ecdq import (
    DitherStream,
    QuantizerSpec,
    error_statistics,
    quantize_dithered,
    rate_accounting,
)
from .shaping import (
    BrickWallSpec,
    ShapingFilter,
    YuleWalkerSystem,
    approx_error_vs_brickwall,
    band_power,
    design_multiband,
    design_yule_walker,
    filter_powers,
    find_lambda_for_ratio,
    min_phase_check,
    pdc_closed,
    pds_closed,
    truncated_fourier_brickwall_error,
)
from .theory import (
    K4Spec,
    OzarowEvaluation,
    TestChannelParams,
    TheoryPoint,
    brickwall_point,
    finite_p_point,
    k4_point,
    ozarow_bounds,
    test_channel_map,
)
from .codec import (
    CodecConfig,
    DescriptionPacket,
    EncodeTrace,
    Multipliers,
    compute_multipliers,
    decode_central,
    decode_side,
    decode_subset_k4,
    delta_sigma_loop,
    encode,
    reconstruction_mse,
)
from .harness import (
    ExperimentConfig,
    SimResult,
    estimate_index_entropy,
    parse_config_text,
    run,
    sweep,
    sweep_rates,
    universality_check,
)

__version__ = "0.1.0"
