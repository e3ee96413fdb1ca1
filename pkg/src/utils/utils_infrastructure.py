# -*- coding: utf-8 -*-
import os
import random
import sys

import numpy as np
import torch
from colorama import Fore, Style
from tqdm import tqdm

# TAG and TAGS Colored for messages output (in console and log)
MSG_TAGS = {
    'VERBOSE'                   : "VERBOSE : ",
    'DEBUG'                     : "DEBUG   : ",
    'INFO'                      : "INFO    : ",
    'WARNING'                   : "WARNING : ",
    'ERROR'                     : "ERROR   : ",
    'CRITICAL'                  : "CRITICAL: ",
}
MSG_TAGS_COLORED = {
    'VERBOSE'                   : f"{Fore.CYAN}{MSG_TAGS['VERBOSE']}",
    'DEBUG'                     : f"{Fore.LIGHTCYAN_EX}{MSG_TAGS['DEBUG']}",
    'INFO'                      : f"{Fore.LIGHTWHITE_EX}{MSG_TAGS['INFO']}",
    'WARNING'                   : f"{Fore.YELLOW}{MSG_TAGS['WARNING']}",
    'ERROR'                     : f"{Fore.RED}{MSG_TAGS['ERROR']}",
    'CRITICAL'                  : f"{Fore.MAGENTA}{MSG_TAGS['CRITICAL']}",
}


def colorize_tags(message: str) -> str:
    """Swap plain MSG_TAGS for their colored version (console only, never the log file)."""
    colored = message
    touched = False
    for level, tag in MSG_TAGS.items():
        if tag in colored:
            colored = colored.replace(tag, MSG_TAGS_COLORED[level])
            touched = True
    if not touched:
        return message
    if colored.endswith("\n"):
        return colored[:-1] + Style.RESET_ALL + "\n"
    return colored + Style.RESET_ALL


# ============================== RUNTIME SETUP =============================== #
def seed_everything(seed: int, single_thread: bool = True) -> None:
    """
    Seed python, numpy and torch. With single_thread=True torch runs on one
    intra-op thread and deterministic kernels, so metric logs repeat bit-for-bit.
    """
    random.seed(seed)
    np.random.seed(seed % (2 ** 32))
    torch.manual_seed(seed)
    if single_thread:
        torch.set_num_threads(1)
        torch.use_deterministic_algorithms(True, warn_only=True)


def select_device(requested: str = "auto") -> torch.device:
    requested = (requested or "auto").strip().lower()
    if requested == "auto":
        return torch.device("cuda" if torch.cuda.is_available() else "cpu")
    if requested.startswith("cuda") and not torch.cuda.is_available():
        print(f"{MSG_TAGS['WARNING']}CUDA requested but not available. Falling back to CPU.")
        return torch.device("cpu")
    return torch.device(requested)


# ============================== LOGGING SYSTEM ============================== #
class LoggerDual:
    """
    Simple dual logger that mirrors stdout prints to both console and a log file.
    Replaces sys.stdout so every print() goes to both outputs automatically.
    Console output gets colored tags; the log file keeps plain text.
    """
    def __init__(self, log_file_path: str, terminal=None):
        self.terminal = terminal if terminal is not None else sys.stdout
        os.makedirs(os.path.dirname(os.path.abspath(log_file_path)), exist_ok=True)
        self.log = open(log_file_path, "a", encoding="utf-8")
        self.log_file_path = log_file_path

    def write(self, message: str):
        is_tty = getattr(self.terminal, "isatty", lambda: False)()
        self.terminal.write(colorize_tags(message) if is_tty else message)
        self.log.write(message)

    def flush(self):
        """Required for compatibility with Python's stdout flush behavior."""
        self.terminal.flush()
        self.log.flush()

    def isatty(self) -> bool:
        return getattr(self.terminal, "isatty", lambda: False)()

    def close(self) -> None:
        try:
            self.log.close()
        except Exception:
            pass


def progress(iterable=None, desc: str = "", total: int | None = None, enabled: bool = True):
    """
    tqdm bar bound to the real stderr, so bars never end up inside the log
    file written by LoggerDual.
    """
    return tqdm(
        iterable,
        desc=desc,
        total=total,
        file=sys.__stderr__,
        leave=False,
        dynamic_ncols=True,
        disable=not enabled,
    )
