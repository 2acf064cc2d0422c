"""Multi-temporal SAR despeckling on synthetic Goodman-model stacks."""

from mtsar.core import Image, Region, SarError, Stack, ValidationError, crop, validate_stack
from mtsar.despeckle import (
    BoxcarSpec,
    DespecklerSpec,
    ExternalSpec,
    IdentitySpec,
    PluginError,
    boxcar,
    despeckle,
    external_invoke,
    parse_despeckler_spec,
)
from mtsar.multitemporal import (
    EpsilonPolicy,
    SuperImageAccumulator,
    preestimate_stack,
    quegan,
    quegan_with_despeckler,
    rabasar,
    rabasar_denoised_super,
    ratio_image,
    super_image,
)
from mtsar.speckle import (
    ChangeEvent,
    ConstantScene,
    EdgeScene,
    LinesScene,
    PointTargetsScene,
    SceneKind,
    SceneScript,
    corrupt,
    generate_scene,
    generate_stack,
    sample_speckle,
)

__version__ = "0.1.0"
