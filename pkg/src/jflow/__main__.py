import sys

from jflow.cli.main import main

sys.exit(main())
