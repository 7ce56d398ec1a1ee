import sys

from dcae.cli import main

sys.exit(main())
