import sys

from entropy_fsvm.cli import main

sys.exit(main())
