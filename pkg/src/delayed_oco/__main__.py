import sys

from delayed_oco.cli import main

sys.exit(main())
