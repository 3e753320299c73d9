#  defines.py - this file is part of the infantcry_tools package.
#  Copyright (C) 2024- infantcry_tools developers
#
#  This program is free software: you can redistribute it and/or modify
#  it under the terms of the GNU General Public License as published by
#  the Free Software Foundation, either version 3 of the License, or
#  (at your option) any later version.
#
#  This program is distributed in the hope that it will be useful,
#  but WITHOUT ANY WARRANTY; without even the implied warranty of
#  MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE. See the
#  GNU General Public License for more details.
#
#  You should have received a copy of the GNU General Public License
#  along with this program. If not, see <https://www.gnu.org/licenses/>.


# audio
SAMPLE_RATE = 16000
PCM_SCALE = 32768.0
DEFAULT_CLIP_SECONDS = 2.0

# label sets (order is fixed, class index == position)
DETECT_LABELS = ["no-cry", "cry"]
REASON_LABELS = ["awake", "hug", "sleepy", "uncomfortable", "diaper", "hungry"]
PRETRAIN_LABELS = ["event_{:d}".format(i) for i in range(10)]
TASKS = ["detect", "classify", "pretrain"]
LABEL_SETS = {"detect": DETECT_LABELS, "classify": REASON_LABELS, "pretrain": PRETRAIN_LABELS}

# stft / log-mel defaults
WINDOW_LEN = 512
HOP_LEN = 160
FFT_LEN = 512
N_MELS = 64
FMIN_HZ = 50.0
FMAX_HZ = 8000.0
LOG_FLOOR = 1e-10

# architectures
ARCHS = ["CNN10", "CNN14", "ResNet22"]
CNN10_WIDTHS = [64, 128, 256, 512]
CNN14_WIDTHS = [64, 128, 256, 512, 1024, 2048]
RESNET22_WIDTHS = [64, 64, 128, 128, 256, 256, 512, 512]
RESNET22_POOL_AFTER = [1, 3, 5, 7]
RESNET22_POST_WIDTH = 2048
POOL_HEADS = ["max", "avg", "add", "statistic", "attention"]
POOL_HEAD_NAMES = {"max": "max", "avg": "avg", "add": "max+avg",
                   "statistic": "statistic", "attention": "attention"}
DEFAULT_ATTENTION_HEADS = 4

# batch norm / optimizer
BN_MOMENTUM = 0.9
BN_EPS = 1e-5
ADAM_LR = 1e-3
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

# distillation / quantization
KD_TEMPERATURE = 2.0
KD_LAMBDA = 0.5
QUANT_LEVELS = 127

# model container
ICNM_MAGIC = b"ICNM"
ICNM_VERSION = 1
DTYPE_F32 = 0
DTYPE_I8 = 1

# dataset files
WAV_FOLDER = "wav"
MANIFEST_NAME = "manifest.csv"
SPLIT_NAME = "split.csv"
OVERVIEW_NAME = "overview.csv"
FEATURES_NAME = "features.npz"
TRAIN_TEST_RATIO = 10
PATH_COL = "path"
LABEL_COL = "label"
SPLIT_COL = "split"

# run outputs
CONFIG_NAME = "config.yml"
METRICS_NAME = "metrics.json"
MODEL_NAME = "model.icnm"
NAN_DUMP_NAME = "nan_dump.icnm"
POOLSWEEP_NAME = "poolsweep.csv"
ARCHSWEEP_NAME = "archsweep.csv"
COMPRESSION_NAME = "compression.csv"
PAGE_NAME = "index.html"
TEACHER_MODEL = "teacher.icnm"
STUDENT_MODEL = "student.icnm"
KD_MODEL = "student_kd.icnm"
QUANTIZED_SUFFIX = ".q.icnm"

# run config keys (order is the canonical order of config.yml)
TASK_KEY = "task"
ARCH_KEY = "arch"
WIDTH_KEY = "width_mult"
POOL_KEY = "pool_head"
HEADS_KEY = "heads"
N_MELS_KEY = "n_mels"
CLIP_SECONDS_KEY = "clip_seconds"
EPOCHS_KEY = "epochs"
BATCH_KEY = "batch_size"
LR_KEY = "lr"
SEED_KEY = "seed"
PRETRAINED_KEY = "pretrained_checkpoint"
TEMPERATURE_KEY = "temperature"
KD_LAMBDA_KEY = "kd_lambda"
TEACHER_ARCH_KEY = "teacher_arch"
STUDENT_ARCH_KEY = "student_arch"
TEACHER_KEY = "teacher_checkpoint"
MODEL_PATH_KEY = "model_path"
N_PER_CLASS_KEY = "n_per_class"
TRAIN_PER_CLASS_KEY = "train_per_class"
DATA_DIR_KEY = "data_dir"
OUT_DIR_KEY = "out_dir"

# metrics json keys
ACCURACY_KEY = "accuracy"
PER_CLASS_KEY = "per_class_accuracy"
CONFUSION_KEY = "confusion_matrix"
LOSS_CURVE_KEY = "loss_curve"
EVAL_CURVE_KEY = "eval_accuracy_curve"
LABELS_KEY = "labels"
COUNT_KEY = "n_eval"

# report
COMPRESSION_COLUMNS = ["name", "accuracy", "bytes", "ratio"]
POOLSWEEP_COLUMNS = ["pool_head", "accuracy"]
ARCHSWEEP_COLUMNS = ["model", "pretrained", "accuracy"]
OVERVIEW_COLUMNS = ["task", "training", "testing"]
COMPRESSION_VARIANTS = [("Teacher", TEACHER_MODEL),
                        ("Student", STUDENT_MODEL),
                        ("Knowledge distillation", KD_MODEL),
                        ("Model quantization", TEACHER_MODEL.replace(".icnm", QUANTIZED_SUFFIX)),
                        ("Model quantization + distillation", KD_MODEL.replace(".icnm", QUANTIZED_SUFFIX))]

# html
INFO_SECTION = "Info"
RESULTS_SECTION = "Results"
COMPRESSION_SECTION = "Model compression"
POOLSWEEP_SECTION = "Pooling heads"
ARCHSWEEP_SECTION = "Architectures"
FIGURES_SECTION = "Figures"
