import sys
import warnings

from qsat.cli import main

warnings.filterwarnings("ignore", category=UserWarning)

if __name__ == "__main__":
    sys.exit(main())
