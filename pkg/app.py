"""
Entry point for the Schwinger fractal-ansatz toolkit.

    python app.py predict --spec 11 --n-seed 12 --n-target 24
"""
import os
import sys

sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from config import config  # noqa: E402  (loads .env)

os.makedirs(os.path.dirname(config.LOG_FILE), exist_ok=True)
os.makedirs(config.CACHE_DIR, exist_ok=True)

from cli.commands import main  # noqa: E402

if __name__ == "__main__":
    main()
