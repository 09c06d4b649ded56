import sys

from ncwno.cli import main

sys.exit(main())
