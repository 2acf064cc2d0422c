import sys

from mtsar.cli import main

sys.exit(main())
