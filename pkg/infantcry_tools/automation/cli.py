#  cli.py - this file is part of the infantcry_tools package.
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


import sys
import json
import logging
import argparse
from .. import __version__
from ..algorithms import experiments
from ..common import defines
from ..common.exceptions import InfantCryError, ConfigError, IoError
from ..utils import file_utils

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"

VERBS = ["synth", "featurize", "train", "eval", "poolsweep", "archsweep", "distill", "quantize", "report",
         "infer", "plot"]


def _common_args(ap):
    ap.add_argument("--config", default=None, help="config.yml file (or a run folder containing one)")
    ap.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                    help="override one config field, repeatable")
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--out", default=None, help="output folder (out_dir)")
    ap.add_argument("--data", default=None, help="dataset folder (data_dir)")
    ap.add_argument("--model", default=None, help="model file (model_path)")
    verbosity = ap.add_mutually_exclusive_group()
    verbosity.add_argument("--verbose", action="store_true")
    verbosity.add_argument("--quiet", action="store_true")


class CommandParser(argparse.ArgumentParser):
    """Argument parser whose usage errors exit with the invalid input code."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(ConfigError.exit_code, "{}: error: {}\n".format(self.prog, message))


def build_parser():
    ap = CommandParser(prog="infantcry", description="Infant cry detection and classification tools.")
    ap.add_argument("--version", action="version", version="%(prog)s {}".format(__version__))
    verbs = ap.add_subparsers(dest="verb", metavar="VERB")
    verbs.required = True
    for verb in VERBS:
        sub = verbs.add_parser(verb)
        _common_args(sub)
        if verb == "infer":
            sub.add_argument("wav", help="wav file to classify")
        elif verb == "plot":
            sub.add_argument("wavs", nargs="*", help="wav files (default : one clip per class of the dataset)")

    return ap


def resolve_config(args):
    """defaults < --config file < --set items < dedicated flags."""
    cfg = file_utils.RunConfig.load(args.config) if args.config is not None else file_utils.RunConfig()
    cfg.update(file_utils.parse_set_args(args.overrides))
    flags = {defines.SEED_KEY: args.seed, defines.OUT_DIR_KEY: args.out, defines.DATA_DIR_KEY: args.data,
             defines.MODEL_PATH_KEY: args.model}
    cfg.update({k: v for k, v in flags.items() if v is not None})

    return cfg


def setup_logging(args):
    level = logging.INFO
    if args.verbose:
        level = logging.DEBUG
    elif args.quiet:
        level = logging.WARNING
    logging.basicConfig(level=level, format=LOG_FORMAT, stream=sys.stderr, force=True)


def run(args):
    """Execute one verb; returns the JSON document to print, if any."""
    cfg = resolve_config(args)
    out_dir = cfg.out_dir
    verb = args.verb
    if verb == "synth":
        experiments.cmd_synth(cfg)
    elif verb == "featurize":
        experiments.cmd_featurize(cfg)
    elif verb == "train":
        experiments.cmd_train(cfg, out_dir)
    elif verb == "eval":
        experiments.cmd_eval(cfg, out_dir)
    elif verb == "poolsweep":
        experiments.cmd_poolsweep(cfg, out_dir)
    elif verb == "archsweep":
        experiments.cmd_archsweep(cfg, out_dir)
    elif verb == "distill":
        experiments.cmd_distill(cfg, out_dir)
    elif verb == "quantize":
        experiments.cmd_quantize(cfg, out_dir)
    elif verb == "report":
        experiments.cmd_report(cfg, out_dir)
    elif verb == "infer":
        return experiments.cmd_infer(cfg, args.wav)
    elif verb == "plot":
        experiments.cmd_plot(cfg, args.wavs, out_dir)
    return None


def main(argv=None):
    """Command-line entry point.

    Returns
    -------
    int
        0 on success, 1 on validation errors, 2 on I/O errors, 3 on numeric failures
    """
    args = build_parser().parse_args(argv)
    setup_logging(args)
    try:
        result = run(args)
    except InfantCryError as e:
        sys.stderr.write("error: {}\n".format(e))
        return e.exit_code
    except OSError as e:
        sys.stderr.write("error: {}\n".format(e))
        return IoError.exit_code

    if result is not None:
        sys.stdout.write(json.dumps(result, indent=2) + "\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
