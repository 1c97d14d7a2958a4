"""Constants for GALA training and evaluation."""

# Propagation operator kinds
SMOOTHING = "smoothing"
NAIVE_SHARPENING = "naive_sharpening"
STABLE_SHARPENING = "stable_sharpening"
OPERATOR_KINDS = (SMOOTHING, NAIVE_SHARPENING, STABLE_SHARPENING)

# Activations
RELU = "relu"
IDENTITY = "identity"

# Loss modes
MODE_RECON = "recon"
MODE_SUBSPACE = "recon+subspace"
MODE_LINK = "recon+link"

# Training schedule
PRETRAIN_LEARNING_RATE = 1.0e-4
FINETUNE_LEARNING_RATE = 1.0e-6
FINETUNE_EPOCHS = 50
MAX_EPOCHS = 2000
CONVERGENCE_WINDOW = 10
CONVERGENCE_REL_TOL = 1.0e-6

# Adam
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPSILON = 1.0e-8

# Architecture defaults
HIDDEN_DIMS = (256, 128)

# Subspace / link costs
DEFAULT_LAMBDA = 1.0
DEFAULT_MU = 1.0
DEFAULT_GAMMA = 1.0
DENSE_LINK_MAX_NODES = 500
SIGMOID_SAFE_LOGIT = 30.0

# Evaluation
DEFAULT_K_NN = 15
KMEANS_RESTARTS = 10
KMEANS_MAX_ITER = 300
KMEANS_TOL = 1.0e-8
CLUSTERING_REPEATS = 50
LINK_INITIALIZATIONS = 10
VAL_FRACTION = 0.05
TEST_FRACTION = 0.10

# Numerics
JACOBI_MAX_SWEEPS = 100
JACOBI_TOL = 1.0e-12
SYMMETRY_TOL = 1.0e-10
SPD_MIN_EIGENVALUE = 1.0e-12

# Seed substreams
STREAM_INIT = "init"
STREAM_SPLIT = "split"
STREAM_CLUSTERING = "clustering"
STREAM_SBM = "sbm"
STREAM_NEGATIVES = "negatives"

# Output files
METRICS_FILE = "metrics.json"
TRAIN_REPORT_FILE = "train_report.json"
TIMINGS_FILE = "timings.json"  # wall-clock only; differs between reruns
EMBEDDINGS_FILE = "embeddings.tsv"
CHECKPOINT_FILE = "checkpoint.json"
ABLATION_JSON_FILE = "ablation_table.json"
ABLATION_TEXT_FILE = "ablation_table.txt"
RADIUS_FILE = "radius.json"
CHECKPOINT_FORMAT = "gala-checkpoint"
CHECKPOINT_VERSION = 1

# Exit codes
EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
