import sys

from esrules.cli import main

sys.exit(main())
