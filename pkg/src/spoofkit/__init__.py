"""spoofkit: black-box fooling attacks on image classifiers.

Builds unrecognizable images that a classifier nevertheless assigns to a
chosen target class with high confidence, via greedy single-pixel hill
climbing or MAP-Elites evolution over direct and CPPN image encodings, plus
the query-counted oracle layer, metrics, and a retraining defense.
"""

from .datasets import LabeledDataset, load_idx, load_mnist_dir, save_idx
from .encodings import (
    ACTIVATIONS,
    ConnGene,
    CppnGenome,
    DirectGenome,
    MutationParams,
    NodeGene,
    genome_from_json,
    genome_to_json,
    mutate_cppn,
    mutate_direct,
    random_genome,
    render,
    render_cppn,
    validate_cppn,
)
from .errors import (
    CapacityError,
    ConfigError,
    FormatError,
    NotFoundError,
    ProtocolError,
    SpoofkitError,
    TrainingScopeError,
    TransportError,
)
from .experiment import (
    ExperimentConfig,
    RunOutcome,
    build_oracle,
    export_heatmap_csv,
    load_run_records,
    resolve_network,
    run_experiment,
)
from .image import (
    DIFF_TOLERANCE,
    InitMode,
    PixelProposal,
    apply_proposal,
    as_image,
    changed_location_ratio,
    decode_png,
    encode_png,
    load_png,
    new_canvas,
    quantize,
    save_png,
)
from .mapelites import (
    Archive,
    EliteBin,
    EvolutionConfig,
    EvolutionResult,
    evolve,
    replay_elite,
)
from .metrics import (
    Aggregate,
    ClassOutcome,
    RunRecord,
    aggregate,
    fooling_asr,
    queries_per_target,
    read_aggregate_csv,
    write_aggregate_csv,
)
from .network import (
    Conv2d,
    Dense,
    Flatten,
    MaxPool,
    NetworkSpec,
    Relu,
    Softmax,
    check_weights,
    forward_builtin,
    forward_one,
    init_weights,
    lenet_spec,
    mlp_victim_spec,
    softmax,
)
from .oracle import BuiltinOracle, FunctionOracle, Oracle, RemoteOracle
from .retrain import (
    EpochStats,
    TrainConfig,
    TrainOutcome,
    build_fooling_class_dataset,
    evaluate_accuracy,
    extend_final_layer,
    fine_tune_final_layer,
    loss_and_grads,
    train_dense,
)
from .spoof import (
    AttackConfig,
    AttackResult,
    init_ablation,
    replay_accepted,
    spoof_attack,
    spoof_batch,
)
from .weights import load_weights, pack_weights, save_weights, unpack_weights
from .wire import (
    ServerInfo,
    UniformStubHandler,
    WireClient,
    WireServer,
    serve_stdio,
)

__version__ = "0.1.0"
