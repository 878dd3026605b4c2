from .result_writer import ResultWriter, ResultFile, OutputFormat, read_result, data_section, render_csv
