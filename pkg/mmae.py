#!/usr/bin/env python3
"""
🎯 Multimodal EEG/EMG Autoencoder Codec
Train, compress, decompress and evaluate from the command line
"""

import sys

from lib.cli import main

if __name__ == "__main__":
    sys.exit(main())
