import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(os.path.abspath(__file__)), "src"))

from qudit_bpqm.app.cli import cli as application

if __name__ == "__main__":
    application()
