import numpy as np

# Predicted probabilities never reach exactly 0 or 1.
PROBABILITY_FLOOR = float(np.finfo(float).eps)
# Scores are clipped to [LOGIT_CLIP, 1 - LOGIT_CLIP] before taking logits.
LOGIT_CLIP = 1e-12

CLAMP_EPS = 1e-3
ECE_BINS = 10
FOLDS = 10
GWAS_FOLDS = 5

LOGISTIC_L2 = 1e-4
LOGISTIC_TOLERANCE = 1e-8
LOGISTIC_MAX_ITERATIONS = 10_000
NB_VAR_SMOOTHING = 1e-9
MLP_HIDDEN = 16
MLP_EPOCHS = 200
MLP_BATCH_SIZE = 64
MLP_LEARNING_RATE = 0.01

OUTCOME_RIDGE = 1e-8

PCA_COMPONENTS = 2
PCA_TOLERANCE = 1e-9
PCA_MAX_SWEEPS = 10_000

NU_GENE = 0.4
NU_CONF = 0.4
NU_NOISE = 0.2

DRUG_VARIANTS = ("A", "B", "C", "D")
TRUTH_DRAWS = 1_000_000
POISSON_MEAN_FLOOR = 1e-9

BASE_MODELS = ("logistic", "nb", "mlp")
RECALIBRATORS = ("none", "isotonic", "sigmoid")
ESTIMATORS = ("naive", "iptw", "aipw")
