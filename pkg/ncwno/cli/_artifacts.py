import json
import platform
from pathlib import Path

import numpy as np
import pywt
import scipy
import sklearn
import yaml

PLOT_SCRIPT = '''"""Plot accuracy curves from metrics.csv: python plot_metrics.py [metrics.csv] [out.png]"""
import csv
import sys
from collections import defaultdict

import matplotlib
matplotlib.use('Agg')
import matplotlib.pyplot as plt


def main(path='metrics.csv', out='metrics.png'):
    curves = defaultdict(lambda: ([], [], [], []))
    with open(path, newline='') as f:
        for row in csv.DictReader(f):
            steps, means, lows, highs = curves[row['task']]
            steps.append(int(row['step']))
            means.append(float(row['mean_acc']))
            lows.append(float(row['ci95_low']))
            highs.append(float(row['ci95_high']))
    fig, ax = plt.subplots(figsize=(6, 4))
    for task, (steps, means, lows, highs) in curves.items():
        ax.plot(steps, means, label=task)
        ax.fill_between(steps, lows, highs, alpha=0.3)
    ax.set_xlabel('time step')
    ax.set_ylabel('accuracy')
    ax.legend()
    fig.tight_layout()
    fig.savefig(out, dpi=150)


if __name__ == '__main__':
    main(*sys.argv[1:3])
'''


def package_versions():
    from ncwno import __version__
    return {
        'ncwno': __version__,
        'numpy': np.__version__,
        'scipy': scipy.__version__,
        'scikit-learn': sklearn.__version__,
        'PyWavelets': pywt.__version__,
        'PyYAML': yaml.__version__,
        'python': platform.python_version(),
    }


def write_stamp(directory, config):
    """Write ``stamp.json``: command, config hash, seed and package versions."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    stamp = {'command': config.command, 'config_sha256': config.digest(), 'seed': config.seed,
             'versions': package_versions()}
    with open(directory / 'stamp.json', 'w', encoding='utf-8') as f:
        json.dump(stamp, f, indent=2, sort_keys=True)
        f.write('\n')
    return stamp


def write_plot_script(directory):
    path = Path(directory) / 'plot_metrics.py'
    with open(path, 'w', encoding='utf-8') as f:
        f.write(PLOT_SCRIPT)
    return path
