# rlstate/__main__.py
from rlstate.cli import main

if __name__ == "__main__":
    main()
