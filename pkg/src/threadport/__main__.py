import sys

from threadport.cli import main

sys.exit(main())
