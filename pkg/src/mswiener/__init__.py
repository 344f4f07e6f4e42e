"""Multi-scale overlapping Wiener image denoiser with blind noise estimation."""

from .blocks import (
    BlockPlan,
    IdentityBlockFilter,
    ScaleMode,
    ScaleSet,
    make_plan,
    run_multi_scale,
    run_single_scale,
)
from .coring import CoringNetDef, collate_h, param_count_coring, refine_h, scatter_h
from .errors import ConfigError, CoverageError, DataError, MsWienerError, NumericError
from .image import ImagePlanar, from_array, load_png, psnr, save_png
from .noisegen import (
    NoiseParams,
    add_noise,
    empirical_sigma_map,
    ground_truth_sigma_map,
    make_test_image,
)
from .pipeline import RunConfig, config_hash, denoise_image, preset
from .sigma import (
    NetworkDef,
    SigmaMap,
    estimate_sigma_statistical,
    infer_sigma_map,
    param_count,
)
from .weights import WeightBundle, read_bundle, write_bundle
from .wiener import (
    CoringResult,
    DcKind,
    DcRestore,
    DcStrategy,
    WienerBlockFilter,
    block_dc,
    core_psd,
    filter_block,
)
from .windows import WindowKind, WindowSpec, WindowTable, gain_map, make_window

__version__ = "0.1.0"
