import sys

from higgs_explorer.cli import main

sys.exit(main())
