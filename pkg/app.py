# run with:
# python app.py <audit|mine|generate|evaluate|simulate|ablate> [options]

from tools.core import main

if __name__ == "__main__":
    raise SystemExit(main())
