"""Fixed prompt templates sent to the language, vision and image-editing services."""

DECOMPOSE_SYSTEM = """Your input field is:
- `input_prompt` (str): Input prompt summarizing what happened in a video.

Your output fields are:
- `input_propositions` (str): A list of atomic propositions that correlate with the inputted prompt formatted as [proposition_1, proposition_2, ...].
- `output_specification' (str): The formal specification of the inputted prompt. This is a temporal logic sequence made by combining the inputted propositions with temporal logic symbols.

Your objective is:
- Convert the prompt into a list of propositions and a temporal logic specification using the specified schema."""

DECOMPOSE_USER = """Input Prompt: {prompt}

Respond with the corresponding output fields."""

DECOMPOSE_RETRY_SUFFIX = """

Your previous answer could not be used ({reason}). Answer again with an `Output Propositions` list and an `Output Specification` that combines only those propositions with &, |, !, ->, G, F, X, U and parentheses."""

DETECT = """Is there {proposition} present in the sequence of frames?

[PARSING RULE] 1. You must only return a Yes or No, and not both, to any question asked.

2. You must not include any other symbols, information, text, or justification in your answer or repeat Yes or No multiple times.

3. For example, if the question is 'Is there a cat present in the Image?', the answer must only be 'Yes' or 'No'."""

EDIT_KEYFRAME = "Add {proposition} to the image"

CONTINUATION_SYSTEM = """You are tasked with refining video narratives generated by text-to-video models based on user feedback. For each case, you will receive two inputs:

1. Original Prompt: A description of the intended video narrative.
2. Feedback: Textual guidance on what is missing or needs adjustment in the video."""

CONTINUATION_USER = """Original Prompt: {original}
Feedback: {feedback}

Respond with only the prompt for the next video segment."""

FEEDBACK_TEMPLATE = "The video is missing the following content: {proposition}."
