from __future__ import annotations

# Execution modes
MODE_PIXEL_CENTRIC = "pixel-centric"
MODE_MEMORY_CENTRIC = "memory-centric"
MODE_SPARW = "sparw"
MODE_TEMP_WARP = "temp-warp"
MODE_DOWNSAMPLE_2 = "downsample-2"
MODES = (MODE_PIXEL_CENTRIC, MODE_MEMORY_CENTRIC, MODE_SPARW, MODE_TEMP_WARP, MODE_DOWNSAMPLE_2)

# Per-pixel warp classification
HOLE_WARPED = 0
HOLE_DISOCCLUDED = 1
HOLE_VOID = 2

# Sequence frame kinds
FRAME_REFERENCE = "reference"
FRAME_TARGET = "target"

# Access trace enums (stored as small ints in trace columns)
LEVEL_DRAM = 0
LEVEL_SRAM = 1
LEVEL_NAMES = {LEVEL_DRAM: "DRAM", LEVEL_SRAM: "SRAM"}

KIND_FEATURE = 0
KIND_RIT = 1
KIND_WEIGHTS = 2
KIND_NAMES = {KIND_FEATURE: "feature", KIND_RIT: "rit", KIND_WEIGHTS: "weights"}

TAG_UNCLASSIFIED = -1
TAG_RANDOM = 0
TAG_STREAMING = 1
TAG_NAMES = {TAG_UNCLASSIFIED: "", TAG_RANDOM: "random", TAG_STREAMING: "streaming"}

# SRAM layouts
LAYOUT_FEATURE_MAJOR = "feature-major"
LAYOUT_CHANNEL_MAJOR = "channel-major"

# Cache policies
POLICY_LRU = "LRU"
POLICY_BELADY = "Belady"

# Rendering constants
Z_NEAR = 1e-4
EARLY_TERMINATION_EPS = 1e-4
DEFAULT_TAU = 0.5
FP16_BYTES = 2
RIT_ENTRY_BYTES = 48
PFM_INF = 3.4e38

# Structured log keys
LOG_KEY_EVENT = "WS_EVENT"
LOG_KEY_FRAME = "FRAME"
LOG_KEY_KIND = "KIND"
LOG_KEY_MODE = "MODE"
LOG_KEY_PIXELS = "PIXELS"
LOG_KEY_SAMPLES = "SAMPLES"
LOG_KEY_MVOXELS = "MVOXELS"
LOG_KEY_PSNR = "PSNR"
LOG_KEY_PATH = "PATH"
LOG_KEY_RESULT = "RESULT"

# Events
EVENT_RENDER = "render"
EVENT_WARP = "warp"
EVENT_SEQUENCE = "sequence"
EVENT_MEMSIM = "memsim"
EVENT_REPORT = "report"
EVENT_ERROR = "error"
