"""hysterid: simulate degrading hysteretic structures and learn the
low- to high-fidelity discrepancy with operator networks."""

__version__ = "0.1.0"

from .hysteresis import (
    BoucWenParams,
    BaberWenParams,
    PinchingParams,
    HystereticState,
    DegenerateStateError,
    bouc_wen_rate,
    baber_wen_rate,
    pinching_rate,
    pinching_shape,
    degradation_shapes,
    energy_rate,
    hysteretic_rate,
)
from .mdof_models import (
    MdofSystem,
    HystereticElement,
    CorrosionModel,
    build_4dof,
    build_half_car,
    build_quarter_car,
    build_shear_building,
    rayleigh_coefficients,
    sample_uncertain,
)
from .excitation import (
    ExcitationSignal,
    KanaiTajimiSpec,
    RoadSpec,
    RoadProfile,
    ParseError,
    kanai_tajimi_psd,
    kanai_tajimi_realize,
    road_profile,
    road_signal,
    load_accelerogram,
)
from .simulate import (
    Dataset,
    DivergenceError,
    IntegratorSpec,
    QoISpec,
    SimResult,
    EXAMPLE_NAMES,
    assemble,
    assemble_ensemble,
    integrate,
    get_example,
    generate_dataset,
    load_dataset,
    write_dataset,
    standard_train_size,
)
from .neuralop import (
    AdamConfig,
    DenseNet,
    OperatorArch,
    OperatorModel,
    TrainingDivergence,
    init_model,
    train,
    save_checkpoint,
    load_checkpoint,
)
from .bifidelity import (
    BiFidelityDeepOnet,
    StandardDeepOnet,
    UndefinedMetricError,
    rel_rmse,
    predict_bifidelity,
    passthrough_errors,
    histogram_overlap,
    run_experiment,
    write_report,
    sweep_training_size,
    sweep_pinching,
    sweep_noise,
    split_root_seed,
)

__all__ = [
    "__version__",
    # hysteresis laws
    "BoucWenParams", "BaberWenParams", "PinchingParams", "HystereticState",
    "DegenerateStateError", "bouc_wen_rate", "baber_wen_rate",
    "pinching_rate", "pinching_shape", "degradation_shapes", "energy_rate",
    "hysteretic_rate",
    # structural models
    "MdofSystem", "HystereticElement", "CorrosionModel", "build_4dof",
    "build_half_car", "build_quarter_car", "build_shear_building",
    "rayleigh_coefficients", "sample_uncertain",
    # excitation
    "ExcitationSignal", "KanaiTajimiSpec", "RoadSpec", "RoadProfile",
    "ParseError", "kanai_tajimi_psd", "kanai_tajimi_realize", "road_profile",
    "road_signal", "load_accelerogram",
    # simulation and datasets
    "Dataset", "DivergenceError", "IntegratorSpec", "QoISpec", "SimResult",
    "EXAMPLE_NAMES", "assemble", "assemble_ensemble", "integrate",
    "get_example", "generate_dataset", "load_dataset", "write_dataset",
    "standard_train_size",
    # operator networks
    "AdamConfig", "DenseNet", "OperatorArch", "OperatorModel",
    "TrainingDivergence", "init_model", "train", "save_checkpoint",
    "load_checkpoint",
    # protocol comparison
    "BiFidelityDeepOnet", "StandardDeepOnet", "UndefinedMetricError",
    "rel_rmse", "predict_bifidelity", "passthrough_errors",
    "histogram_overlap", "run_experiment", "write_report",
    "sweep_training_size", "sweep_pinching", "sweep_noise",
    "split_root_seed",
]
