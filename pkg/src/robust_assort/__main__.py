import sys

from robust_assort.cli import main

sys.exit(main())
